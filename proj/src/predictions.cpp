#include "vatika/predictions.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vatika/errors.hpp"

namespace vatika {

using nlohmann::json;

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open prediction file: " + path.string());
  std::vector<PredictionRow> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.contains("pair_id") || !j["pair_id"].is_string())
      throw SchemaError("expected a string", line_no, "pair_id");
    if (!j.contains("prediction") || !j["prediction"].is_string())
      throw SchemaError("expected a string", line_no, "prediction");
    rows.push_back({j["pair_id"].get<std::string>(), j["prediction"].get<std::string>()});
  }
  return rows;
}

std::string serialize_predictions(const std::vector<PredictionRow>& rows) {
  std::string out;
  for (const PredictionRow& r : rows) {
    json j{{"pair_id", r.pair_id}, {"prediction", r.prediction}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_predictions(const std::vector<PredictionRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write prediction file: " + path.string());
  out << serialize_predictions(rows);
}

}  // namespace vatika
