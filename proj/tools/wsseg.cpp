// Command-line front end: synthetic data, label generation, training,
// evaluation and the annotation server.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wsseg/service/http_server.hpp"
#include "wsseg/wsseg.hpp"

namespace fs = std::filesystem;
using namespace wsseg;
namespace tr = wsseg::train;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

Scheme scheme_arg(const std::string& s) {
  const auto scheme = parse_scheme(s);
  if (!scheme || *scheme == Scheme::masked_dense)
    throw ConfigError("scheme must be point_n10 or squiggle_n32");
  return *scheme;
}

std::vector<ImageSample> images_of(const std::vector<tr::DatasetItem>& data) {
  std::vector<ImageSample> out;
  for (const auto& d : data) out.push_back(d.image);
  return out;
}

// Export document of simulated annotations drawn from the dense masks.
ExportDocument simulate_export(const std::vector<tr::DatasetItem>& data, Scheme scheme,
                               std::uint64_t seed) {
  const auto sup = scheme == Scheme::point_n10 ? tr::Supervision::point_n10
                                               : tr::Supervision::squiggle_n32;
  ExportDocument doc;
  for (const auto& item : tr::items_from_masks(data, sup, seed))
    doc.images.push_back({item.image.id, item.label.points});
  return doc;
}

std::vector<tr::TrainItem> training_items(const tr::TrainConfig& cfg,
                                          const std::vector<tr::DatasetItem>& data,
                                          const std::string& labels) {
  if (cfg.supervision == tr::Supervision::dense || labels.empty())
    return tr::items_from_masks(data, cfg.supervision, cfg.seed, cfg.mask_fraction);
  return tr::items_from_export(data, deserialize_export(tr::read_text_file(labels)));
}

tr::TrainOptions progress_options() {
  tr::TrainOptions opt;
  opt.on_epoch = [](const tr::EpochLog& e) {
    std::fprintf(stderr, "epoch %3d  train %.5f  val %.5f%s\n", e.epoch, e.train_loss, e.val_loss,
                 e.skipped ? "  (items skipped)" : "");
  };
  return opt;
}

void write_log(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

std::function<void()> g_stop;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised ship segmentation"};
  app.require_subcommand(1);

  // synth
  std::string spec_file, out_dir;
  std::uint64_t seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", spec_file, "key=value spec file")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Seed");

  // mask
  std::string dataset_dir, out_file;
  double fraction = 0.90;
  auto* mask = app.add_subcommand("mask", "Hide a fraction of the dense labels");
  mask->add_option("--dataset", dataset_dir)->required();
  mask->add_option("--fraction", fraction, "Fraction of labels removed")->capture_default_str();
  mask->add_option("--seed", seed);
  mask->add_option("--out", out_file, "Export document")->required();

  // sample
  std::string scheme_text, annotations_file;
  int sample_n = 32;
  auto* sample = app.add_subcommand("sample", "Produce point or squiggle training labels");
  sample->add_option("--dataset", dataset_dir)->required();
  sample->add_option("--scheme", scheme_text, "point_n10 or squiggle_n32")->required();
  sample->add_option("--annotations", annotations_file,
                     "Annotation log (JSON lines); simulated from masks when omitted");
  sample->add_option("--n", sample_n, "Points per squiggle-annotated image")->capture_default_str();
  sample->add_option("--seed", seed);
  sample->add_option("--out", out_file)->required();

  // train
  std::string config_file, data_dir, labels_file, ckpt, log_file;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", config_file)->required();
  train_cmd->add_option("--data", data_dir)->required();
  train_cmd->add_option("--labels", labels_file, "Export document; derived from masks when omitted");
  train_cmd->add_option("--out", ckpt, "Checkpoint")->required();
  train_cmd->add_option("--log", log_file, "Training log (JSON)");

  // pretrain-finetune
  std::string pre_config_file, pre_data_dir, pre_ckpt;
  auto* pf = app.add_subcommand("pretrain-finetune", "Dense pretraining, then sparse finetuning");
  pf->add_option("--pretrain-config", pre_config_file)->required();
  pf->add_option("--finetune-config", config_file)->required();
  pf->add_option("--pretrain-data", pre_data_dir, "Densely labelled dataset")->required();
  pf->add_option("--data", data_dir, "Finetuning dataset")->required();
  pf->add_option("--labels", labels_file, "Finetuning labels; derived from masks when omitted");
  pf->add_option("--out", ckpt)->required();
  pf->add_option("--log", log_file);

  // eval
  std::string report_file, supervision_text = "Model", augment_text = "None";
  double threshold = 0.5;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a fully labelled holdout");
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--holdout", data_dir)->required();
  eval->add_option("--threshold", threshold)->capture_default_str();
  eval->add_option("--report", report_file, "Table output; a .json twin is written alongside")
      ->required();
  eval->add_option("--supervision", supervision_text, "Supervision column text");
  eval->add_option("--augmentations", augment_text, "Augmentations column text");

  // serve
  std::string images_dir, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the annotation server");
  serve->add_option("--images", images_dir)->required();
  serve->add_option("--log", log_file, "Annotation log (JSON lines)")->required();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto spec = tr::parse_synthetic_spec(tr::read_text_file(spec_file));
      std::vector<tr::DatasetItem> items;
      for (auto& s : tr::generate_synthetic(spec, seed))
        items.push_back({std::move(s.image), std::move(s.mask)});
      tr::save_dataset(out_dir, items);
      std::printf("wrote %zu images to %s\n", items.size(), out_dir.c_str());
    } else if (*mask) {
      const auto data = tr::load_dataset(dataset_dir);
      ExportDocument doc;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (!data[i].mask) throw ValueError("image '" + data[i].image.id + "' has no mask");
        const auto [label, m] = mask_dense_labels(*data[i].mask, fraction, derive_seed(seed, i));
        doc.images.push_back({data[i].image.id, label.points});
      }
      write_text(out_file, serialize_export(doc));
    } else if (*sample) {
      const auto scheme = scheme_arg(scheme_text);
      const auto data = tr::load_dataset(dataset_dir);
      ExportDocument doc;
      if (annotations_file.empty()) {
        doc = simulate_export(data, scheme, seed);
      } else {
        if (!fs::exists(annotations_file)) throw IoError("no such file: " + annotations_file);
        const service::AnnotationService svc(images_of(data), annotations_file);
        doc = svc.export_dataset(scheme, sample_n, seed);
      }
      write_text(out_file, serialize_export(doc));
    } else if (*train_cmd) {
      const auto cfg = tr::load_train_config(config_file);
      const auto data = tr::load_dataset(data_dir);
      const auto result = tr::train(cfg, training_items(cfg, data, labels_file), progress_options());
      nn::save_params(result.params, ckpt);
      for (const auto& w : result.log.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      write_log(log_file.empty() ? ckpt + ".log.json" : log_file,
                tr::training_log_to_json(result.log));
      std::printf("best epoch %d, checkpoint %s\n", result.log.best_epoch, ckpt.c_str());
    } else if (*pf) {
      const auto pre_cfg = tr::load_train_config(pre_config_file);
      const auto fine_cfg = tr::load_train_config(config_file);
      const auto pre_data = tr::load_dataset(pre_data_dir);
      const auto data = tr::load_dataset(data_dir);
      const auto result = tr::pretrain_then_finetune(
          pre_cfg, fine_cfg, pre_data, training_items(fine_cfg, data, labels_file),
          progress_options());
      nn::save_params(result.params, ckpt);
      write_log(log_file.empty() ? ckpt + ".log.json" : log_file,
                {{"pretrain", tr::training_log_to_json(result.pretrain_log)},
                 {"finetune", tr::training_log_to_json(result.finetune_log)}});
      std::printf("checkpoint %s\n", ckpt.c_str());
    } else if (*eval) {
      const auto params = nn::load_params<float>(ckpt);
      const auto holdout = tr::load_dataset(data_dir);
      const auto report = tr::evaluate(params, holdout, threshold, supervision_text, augment_text);
      std::string text = render_table(report, PrMode::ship_class);
      text += "\nAll-pixel (micro) precision/recall:\n" + render_table(report, PrMode::micro_all_pixels);
      write_text(report_file, text);
      write_text(report_file + ".json", report_to_json(report).dump(1) + "\n");
      std::cout << text;
    } else if (*serve) {
      auto svc = service::AnnotationService::from_directory(images_dir, log_file);
      service::HttpServer server(svc);
      const int bound = server.bind(host, port);
      g_stop = [&server] { server.stop(); };
      std::signal(SIGINT, [](int) { if (g_stop) g_stop(); });
      std::signal(SIGTERM, [](int) { if (g_stop) g_stop(); });
      std::printf("serving %zu images on http://%s:%d\n", svc.list_images().size(), host.c_str(), bound);
      std::fflush(stdout);
      server.run();
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.kind().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
