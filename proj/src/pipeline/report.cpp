#include <cstdio>
#include <fstream>

#include "bwe/errors.hpp"
#include "bwe/pipeline.hpp"

namespace bwe::pipeline {
namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

void emit_report(const EvalReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);

  std::string csv = "ratio,model_lsd,baseline_lsd,n_utterances\n";
  std::string plot = "ratio,seen_in_training,model_lsd,baseline_lsd\n";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    const std::string model = report.has_model ? fixed(r.model_lsd) : "";
    csv += std::to_string(r.ratio) + "," + model + "," + fixed(r.baseline_lsd) + "," +
           std::to_string(r.utterances.size()) + "\n";
    plot += std::to_string(r.ratio) + "," + (r.seen_in_training ? "1" : "0") + "," + model + "," +
            fixed(r.baseline_lsd) + "\n";

    nlohmann::ordered_json utts = nlohmann::ordered_json::array();
    for (const auto& u : r.utterances) {
      nlohmann::ordered_json ju;
      ju["utterance_id"] = u.utterance_id;
      ju["length"] = u.length;
      ju["model_lsd"] = report.has_model ? nlohmann::ordered_json(u.model_lsd) : nlohmann::ordered_json();
      ju["baseline_lsd"] = u.baseline_lsd;
      utts.push_back(std::move(ju));
    }
    nlohmann::ordered_json jr;
    jr["ratio"] = r.ratio;
    jr["seen_in_training"] = r.seen_in_training;
    jr["model_lsd"] = report.has_model ? nlohmann::ordered_json(r.model_lsd) : nlohmann::ordered_json();
    jr["baseline_lsd"] = r.baseline_lsd;
    jr["n_utterances"] = r.utterances.size();
    jr["utterances"] = std::move(utts);
    rows.push_back(std::move(jr));
  }

  nlohmann::ordered_json j;
  j["kind"] = report.kind;
  j["has_model"] = report.has_model;
  j["metadata"] = nlohmann::ordered_json::parse(report.metadata.dump());
  j["rows"] = std::move(rows);

  write_text(out_dir / "report.csv", csv);
  write_text(out_dir / "plot_data.csv", plot);
  write_text(out_dir / "report.json", j.dump(2) + "\n");
}

}  // namespace bwe::pipeline
