#pragma once

// Everything except the HTTP front end (wsseg/service/http_server.hpp).

#include "wsseg/error.hpp"
#include "wsseg/raster.hpp"
#include "wsseg/types.hpp"
#include "wsseg/rle.hpp"
#include "wsseg/png_io.hpp"
#include "wsseg/eval_mask.hpp"
#include "wsseg/annotation_json.hpp"
#include "wsseg/sampling.hpp"
#include "wsseg/augment.hpp"
#include "wsseg/loss.hpp"
#include "wsseg/metrics.hpp"
#include "wsseg/report.hpp"
#include "wsseg/nn/ops.hpp"
#include "wsseg/nn/unet.hpp"
#include "wsseg/nn/adam.hpp"
#include "wsseg/nn/params_io.hpp"
#include "wsseg/train/config.hpp"
#include "wsseg/train/split.hpp"
#include "wsseg/train/synthetic.hpp"
#include "wsseg/train/dataset.hpp"
#include "wsseg/train/trainer.hpp"
#include "wsseg/service/annotation_service.hpp"
