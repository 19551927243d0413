#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csitk/errors.hpp"
#include "csitk/experiments.hpp"

namespace csitk::experiments {
namespace {

constexpr int kReportVersion = 1;

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string join_labels(const std::map<std::string, std::string>& labels) {
  std::string out;
  for (const auto& [k, v] : labels) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << content;
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& row : report.rows)
    rows.push_back({{"labels", row.labels}, {"metric", row.metric}, {"value", row.value}});
  return {{"report_version", kReportVersion},
          {"experiment", report.experiment},
          {"config", report.config},
          {"environment", report.environment},
          {"paper_reference", report.paper_reference},
          {"extra", report.extra},
          {"rows", rows}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("report_version"))
    throw IoError("report: missing report_version");
  if (j.at("report_version").get<int>() != kReportVersion)
    throw IoError("report: unsupported version");
  ExperimentReport rep;
  rep.experiment = j.at("experiment").get<std::string>();
  rep.config = j.at("config");
  rep.environment = j.at("environment");
  rep.paper_reference = j.at("paper_reference");
  rep.extra = j.at("extra");
  for (const nlohmann::json& row : j.at("rows")) {
    ReportRow r;
    r.labels = row.at("labels").get<std::map<std::string, std::string>>();
    r.metric = row.at("metric").get<std::string>();
    r.value = row.at("value").get<double>();
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

// Columns, in order: experiment, metric, labels (semicolon-joined k=v pairs,
// key-sorted), value (shortest round-trip decimal).
std::string report_to_csv(const ExperimentReport& report) {
  std::string out = "experiment,metric,labels,value\n";
  for (const ReportRow& row : report.rows) {
    out += report.experiment;
    out += ',';
    out += row.metric;
    out += ',';
    out += join_labels(row.labels);
    out += ',';
    out += nlohmann::json(row.value).dump();
    out += '\n';
  }
  return out;
}

std::string report_to_svg(const ExperimentReport& report) {
  const int width = 720, height = 420;
  const int margin_left = 70, margin_bottom = 90, margin_top = 40, margin_right = 20;
  const int plot_w = width - margin_left - margin_right;
  const int plot_h = height - margin_top - margin_bottom;

  double max_value = 0.0;
  for (const ReportRow& row : report.rows) max_value = std::max(max_value, row.value);
  if (max_value <= 0.0) max_value = 1.0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "  <title>" << xml_escape(report.experiment) << "</title>\n";
  svg << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(report.experiment)
      << "</text>\n";
  // Axes.
  svg << "  <line x1=\"" << margin_left << "\" y1=\"" << margin_top << "\" x2=\"" << margin_left
      << "\" y2=\"" << margin_top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "  <line x1=\"" << margin_left << "\" y1=\"" << margin_top + plot_h << "\" x2=\""
      << margin_left + plot_w << "\" y2=\"" << margin_top + plot_h
      << "\" stroke=\"black\"/>\n";
  svg << "  <text x=\"16\" y=\"" << margin_top + plot_h / 2
      << "\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 16 "
      << margin_top + plot_h / 2 << ")\" text-anchor=\"middle\">"
      << xml_escape(report.rows.empty() ? std::string("value") : report.rows[0].metric)
      << "</text>\n";
  svg << "  <text x=\"" << margin_left - 8 << "\" y=\"" << margin_top + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
      << nlohmann::json(max_value).dump() << "</text>\n";

  const size_t n = report.rows.size();
  if (n > 0) {
    const double slot = static_cast<double>(plot_w) / static_cast<double>(n);
    const double bar_w = std::max(1.0, slot * 0.7);
    // With many rows (histograms), draw every bar but label sparsely.
    const size_t label_stride = std::max<size_t>(1, n / 16);
    for (size_t i = 0; i < n; ++i) {
      const double v = report.rows[i].value;
      const double h = plot_h * (v / max_value);
      const double x = margin_left + slot * static_cast<double>(i) + (slot - bar_w) / 2.0;
      const double y = margin_top + plot_h - h;
      svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\""
          << h << "\" fill=\"#4878a8\"/>\n";
      if (i % label_stride == 0) {
        const double cx = x + bar_w / 2.0;
        const double cy = margin_top + plot_h + 12;
        svg << "  <text x=\"" << cx << "\" y=\"" << cy
            << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\" "
            << "transform=\"rotate(-45 " << cx << " " << cy << ")\">"
            << xml_escape(join_labels(report.rows[i].labels)) << "</text>\n";
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> emit_report(const ExperimentReport& report, const std::string& dir,
                                     const ReportFormats& formats) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory: " + dir);

  std::vector<std::string> written;
  const std::string stem = (fs::path(dir) / report.experiment).string();
  if (formats.json) {
    write_file(stem + ".json", report_to_json(report).dump(2) + "\n");
    written.push_back(stem + ".json");
  }
  if (formats.csv) {
    write_file(stem + ".csv", report_to_csv(report));
    written.push_back(stem + ".csv");
  }
  if (formats.svg) {
    write_file(stem + ".svg", report_to_svg(report));
    written.push_back(stem + ".svg");
  }
  return written;
}

}  // namespace csitk::experiments
