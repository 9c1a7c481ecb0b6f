#include "psd/plots.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "psd/errors.h"

namespace psd {

namespace fs = std::filesystem;

namespace {

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string Fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string BarChart(const std::string& title, const std::vector<std::string>& labels,
                     const std::vector<double>& values, int highlight) {
  const int width = std::max(320, 60 + 28 * static_cast<int>(values.size()));
  const int height = 260;
  const int left = 45, top = 30, plot_h = 170;
  const double bar_w = values.empty() ? 0.0 : (width - left - 15.0) / values.size();
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
      << Escape(title) << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = top + plot_h - plot_h * t / 4.0;
    svg << "<line x1=\"" << left << "\" x2=\"" << width - 10 << "\" y1=\"" << y
        << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << left - 4 << "\" y=\"" << y + 3 << "\" text-anchor=\"end\">"
        << Fixed(t / 4.0, 2) << "</text>\n";
  }
  for (size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    const double x = left + i * bar_w + 2;
    const double h = plot_h * v;
    const char* fill = static_cast<int>(i) == highlight ? "#d62728" : "#1f77b4";
    svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\""
        << std::max(1.0, bar_w - 4) << "\" height=\"" << h << "\" fill=\"" << fill
        << "\"><title>" << Escape(labels[i]) << ": " << Fixed(values[i], 4)
        << "</title></rect>\n";
    svg << "<text x=\"" << x + bar_w / 2 - 2 << "\" y=\"" << top + plot_h + 12
        << "\" text-anchor=\"middle\">" << Escape(labels[i]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string SafeName(const std::string& prep) {
  std::string out;
  for (char c : prep) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
  }
  return out;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw StageError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string LayerAccuracySvg(const std::string& preposition,
                             const std::vector<double>& accuracy, int chosen_layer) {
  std::vector<std::string> labels;
  for (size_t j = 0; j < accuracy.size(); ++j) labels.push_back(std::to_string(j));
  return BarChart("dev accuracy by layer: " + preposition, labels, accuracy, chosen_layer);
}

std::string ConfusionSvg(const PrepositionReport& report) {
  std::set<SenseId> senses;
  size_t peak = 1;
  for (const auto& [key, count] : report.confusion) {
    senses.insert(key.first);
    senses.insert(key.second);
    peak = std::max(peak, count);
  }
  const std::vector<SenseId> axis(senses.begin(), senses.end());
  const int cell = 22, left = 70, top = 70;
  const int n = static_cast<int>(axis.size());
  const int width = left + n * cell + 20, height = top + n * cell + 30;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"6\" y=\"16\" font-size=\"13\">confusion: " << Escape(report.preposition)
      << " (rows gold, columns predicted, acc " << Fixed(report.accuracy, 3) << ")</text>\n";
  for (int i = 0; i < n; ++i) {
    svg << "<text x=\"" << left - 4 << "\" y=\"" << top + i * cell + cell / 2 + 3
        << "\" text-anchor=\"end\">" << Escape(axis[i].raw()) << "</text>\n";
    svg << "<text transform=\"translate(" << left + i * cell + cell / 2 + 3 << ","
        << top - 4 << ") rotate(-60)\">" << Escape(axis[i].raw()) << "</text>\n";
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const auto it = report.confusion.find({axis[r], axis[c]});
      const size_t count = it == report.confusion.end() ? 0 : it->second;
      const int shade = 255 - static_cast<int>(215.0 * count / peak);
      svg << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell << "\" width=\""
          << cell - 1 << "\" height=\"" << cell - 1 << "\" fill=\"rgb(" << shade << ","
          << shade << ",255)\"><title>" << Escape(axis[r].raw()) << " -> "
          << Escape(axis[c].raw()) << ": " << count << "</title></rect>\n";
      if (count > 0) {
        svg << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\""
            << top + r * cell + cell / 2 + 3 << "\" text-anchor=\"middle\">" << count
            << "</text>\n";
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<fs::path> WritePlots(const EvaluationReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::vector<std::string> labels;
  std::vector<double> accs;
  for (const auto& r : report.reports) {
    const std::string base = SafeName(r.preposition);
    if (!r.layer_accuracy.empty()) {
      const fs::path p = dir / (base + ".layers.svg");
      WriteText(p, LayerAccuracySvg(r.preposition, r.layer_accuracy, r.chosen_layer));
      written.push_back(p);
    }
    const fs::path p = dir / (base + ".confusion.svg");
    WriteText(p, ConfusionSvg(r));
    written.push_back(p);
    labels.push_back(r.preposition);
    accs.push_back(r.accuracy);
  }
  const fs::path macro = dir / "macro.svg";
  WriteText(macro, BarChart("test accuracy per preposition (macro " +
                                Fixed(report.macro_accuracy, 4) + ")",
                            labels, accs, -1));
  written.push_back(macro);
  return written;
}

}  // namespace psd
