#include <gtest/gtest.h>

#include "wsseg/report.hpp"

using namespace wsseg;

TEST(Report, ScoreFormatting) {
  EXPECT_EQ(format_score(0.979), ".979");
  EXPECT_EQ(format_score(0.7564), ".756");
  EXPECT_EQ(format_score(1.0), "1.000");
  EXPECT_EQ(format_score(0.0), ".000");
}

TEST(Report, TableLayout) {
  MetricsReport rep;
  rep.rows.push_back({"Squiggle (n=32)", "Grayscale and Inversion", 0.979, 0.978, 0.756, 0.99, 0.99});
  const auto text = render_table(rep);
  const auto first_nl = text.find('\n');
  const std::string header = text.substr(0, first_nl);
  EXPECT_EQ(header, "Supervision     | Augmentations           | Precision | Recall | Jaccard Score");
  const auto last = text.substr(text.rfind('\n', text.size() - 2) + 1);
  EXPECT_EQ(last, "Squiggle (n=32) | Grayscale and Inversion | .979      | .978   | .756\n");
}

TEST(Report, JsonTwinHasColumnsAndBothConventions) {
  MetricsReport rep;
  rep.rows.push_back({"Dense", "None", 0.5, 0.25, 0.2, 0.9, 0.9});
  rep.per_image.push_back({"a", 0.5, 0.25, 0.2});
  const auto j = report_to_json(rep);
  EXPECT_EQ(j["columns"], nlohmann::json({"Supervision", "Augmentations", "Precision", "Recall",
                                          "Jaccard Score"}));
  EXPECT_EQ(j["rows"][0]["Jaccard Score"], 0.2);
  EXPECT_EQ(j["rows"][0]["micro_all_pixels"]["Precision"], 0.9);
  EXPECT_EQ(j["per_image"][0]["image_id"], "a");
}
