// leafray - JSON reports and gnuplot-ready CSV emission
#ifndef LEAFRAY_REPORT_HPP
#define LEAFRAY_REPORT_HPP

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "leafray/config.hpp"

namespace leafray {

using Json = nlohmann::ordered_json;

struct PlotSeries {
  std::string name;  // file stem under plot/
  std::string header;
  std::vector<std::vector<double>> rows;
};

struct ExperimentOutcome {
  bool pass = false;
  double scalar_gap = 0.0;  // the quantity tracked under refinement
  bool gap_exact = false;   // identically-zero gap sequence marker
  Json detail;
  std::vector<PlotSeries> plots;
  std::vector<std::pair<std::string, MatrixField>> fields;  // dumped to fields/
};

inline void write_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  require(bool(os), ErrorCode::InvalidArgument, "write_csv: cannot open " + path.string());
  os << header << "\n";
  char buf[64];
  for (const auto& row : rows) {
    for (size_t k = 0; k < row.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", row[k]);
      os << (k ? "," : "") << buf;
    }
    os << "\n";
  }
}

inline void emit_outcome(const ExperimentConfig& cfg, const ExperimentOutcome& out) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  Json report;
  report["experiment"] = cfg.kind;
  report["seed"] = cfg.seed;
  report["grid"] = Json{{"h", cfg.h}, {"T", cfg.T}, {"S", cfg.box_S}};
  report["surface"] = Json{{"factor", cfg.factor},
                           {"kappa", cfg.kappa},
                           {"length", cfg.length}};
  report["pass"] = out.pass;
  report["scalar_gap"] = out.scalar_gap;
  report["detail"] = out.detail;
  std::ofstream os(fs::path(cfg.out_dir) / "report.json");
  os << report.dump(2) << "\n";
  if (!out.plots.empty()) {
    fs::create_directories(fs::path(cfg.out_dir) / "plot");
    for (const auto& p : out.plots)
      write_csv(fs::path(cfg.out_dir) / "plot" / (p.name + ".csv"), p.header, p.rows);
  }
  if (!out.fields.empty()) {
    fs::create_directories(fs::path(cfg.out_dir) / "fields");
    for (const auto& [name, f] : out.fields)
      save_field(f, (fs::path(cfg.out_dir) / "fields" / (name + ".bin")).string());
  }
}

}  // namespace leafray

#endif
