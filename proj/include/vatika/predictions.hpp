#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vatika {

// One line of a prediction file: {"pair_id": str, "prediction": str}.
struct PredictionRow {
  std::string pair_id;
  std::string prediction;

  friend bool operator==(const PredictionRow&, const PredictionRow&) = default;
};

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::vector<PredictionRow>& rows, const std::filesystem::path& path);
std::string serialize_predictions(const std::vector<PredictionRow>& rows);

}  // namespace vatika
