#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsseg/metrics.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

inline constexpr std::array<const char*, 5> kReportColumns = {
    "Supervision", "Augmentations", "Precision", "Recall", "Jaccard Score"};

/// Three decimals without the leading zero (".979"); 1 renders as "1.000".
inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  std::string s(buf);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return s;
}

/// Pipe-separated table padded to column width. `mode` selects which
/// precision/recall convention fills the Precision and Recall columns.
inline std::string render_table(const MetricsReport& report,
                                PrMode mode = PrMode::ship_class) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({kReportColumns[0], kReportColumns[1], kReportColumns[2], kReportColumns[3],
                   kReportColumns[4]});
  for (const auto& r : report.rows) {
    const bool ship = mode == PrMode::ship_class;
    cells.push_back({r.supervision, r.augmentations,
                     format_score(ship ? r.precision : r.micro_precision),
                     format_score(ship ? r.recall : r.micro_recall), format_score(r.jaccard)});
  }
  std::array<std::size_t, 5> width{};
  for (const auto& row : cells)
    for (std::size_t i = 0; i < 5; ++i) width[i] = std::max(width[i], row[i].size());
  std::string out;
  auto rule = [&] {
    for (std::size_t i = 0; i < 5; ++i) {
      out += std::string(width[i] + (i == 0 || i == 4 ? 1 : 2), '-');
      if (i < 4) out += '+';
    }
    out += '\n';
  };
  for (std::size_t k = 0; k < cells.size(); ++k) {
    for (std::size_t i = 0; i < 5; ++i) {
      std::string cell = cells[k][i];
      cell.resize(width[i], ' ');
      if (i > 0) out += ' ';
      out += cell;
      if (i < 4) out += " |";
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    if (k == 0) rule();
  }
  return out;
}

inline nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"Supervision", r.supervision},
                    {"Augmentations", r.augmentations},
                    {"Precision", r.precision},
                    {"Recall", r.recall},
                    {"Jaccard Score", r.jaccard},
                    {"micro_all_pixels", {{"Precision", r.micro_precision},
                                          {"Recall", r.micro_recall}}}});
  nlohmann::json per_image = nlohmann::json::array();
  for (const auto& p : report.per_image)
    per_image.push_back({{"image_id", p.image_id},
                         {"Precision", p.precision},
                         {"Recall", p.recall},
                         {"Jaccard Score", p.jaccard}});
  return {{"columns", kReportColumns}, {"rows", rows}, {"per_image", per_image}};
}

}  // namespace wsseg
