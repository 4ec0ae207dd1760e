#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oversmooth/sweep.hpp"

namespace oversmooth {

namespace {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y, band;  // band = +-1 sd
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

// Self-contained single-plot SVG line chart with shaded deviation bands.
void write_chart(const std::string& path, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel, const std::vector<Series>& series) {
  const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i] - s.band[i]);
      ymax = std::max(ymax, s.y[i] + s.band[i]);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";

  // Axes.
  svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << xlabel << "</text>\n"
      << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
      << "transform=\"rotate(-90 16 " << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";

  // Ticks: x at every distinct sample point, y at 5 even divisions.
  std::set<double> xticks;
  for (const Series& s : series) xticks.insert(s.x.begin(), s.x.end());
  for (double t : xticks)
    svg << "<line x1=\"" << px(t) << "\" y1=\"" << H - mb << "\" x2=\"" << px(t) << "\" y2=\"" << H - mb + 5
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << px(t) << "\" y=\"" << H - mb + 20 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << num(t) << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double t = ymin + (ymax - ymin) * i / 5.0;
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << ml << "\" y2=\"" << py(t)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << ml - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << num(t) << "</text>\n";
  }

  for (size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    if (s.x.empty()) continue;
    // Deviation band.
    std::ostringstream pts;
    for (size_t i = 0; i < s.x.size(); ++i) pts << px(s.x[i]) << "," << py(s.y[i] + s.band[i]) << " ";
    for (size_t i = s.x.size(); i-- > 0;) pts << px(s.x[i]) << "," << py(s.y[i] - s.band[i]) << " ";
    svg << "<polygon points=\"" << pts.str() << "\" fill=\"" << s.color << "\" fill-opacity=\"0.15\" "
        << "stroke=\"none\"/>\n";
    // Line and markers.
    std::ostringstream line;
    for (size_t i = 0; i < s.x.size(); ++i) line << px(s.x[i]) << "," << py(s.y[i]) << " ";
    svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    for (size_t i = 0; i < s.x.size(); ++i)
      svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << s.color
          << "\"/>\n";
    // Legend.
    const double lx = W - mr - 110, ly = mt + 18 * static_cast<double>(si);
    svg << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22 << "\" y2=\"" << ly
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << lx + 28 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("emit_report: cannot write " + path);
  f << svg.str();
}

}  // namespace

void emit_report(const SweepReport& report, const std::string& out_dir) {
  if (report.rows.empty()) throw std::invalid_argument("emit_report: empty report");
  std::filesystem::create_directories(out_dir);
  save_sweep_csv(report, out_dir + "/sweep.csv");

  const std::vector<SweepAggregate> aggs = aggregate_rows(report);
  std::set<int> beam_set;
  for (const SweepAggregate& a : aggs) beam_set.insert(a.beam);
  const int first_beam = *beam_set.begin();

  // Teacher-forced metrics repeat across beams; plot them once.
  auto single = [&](auto mean_field, auto sd_field, const std::string& label) {
    Series s;
    s.label = label;
    s.color = kPalette[0];
    for (const SweepAggregate& a : aggs)
      if (a.beam == first_beam) {
        s.x.push_back(a.alpha);
        s.y.push_back(a.*mean_field);
        s.band.push_back(a.*sd_field);
      }
    return std::vector<Series>{s};
  };
  write_chart(out_dir + "/os_rate_vs_alpha.svg", "Oversmoothing rate vs alpha", "alpha", "oversmoothing rate",
              single(&SweepAggregate::os_rate_mean, &SweepAggregate::os_rate_sd, "test set"));
  write_chart(out_dir + "/eos_logprob_vs_alpha.svg", "Mean eos log-probability at prefix ends", "alpha",
              "mean log p(eos)", single(&SweepAggregate::eos_logprob_mean, &SweepAggregate::eos_logprob_sd,
                                        "test set"));
  write_chart(out_dir + "/eos_rank_vs_alpha.svg", "Mean normalized eos rank at prefix ends", "alpha",
              "normalized rank (1 = least probable)",
              single(&SweepAggregate::eos_rank_mean, &SweepAggregate::eos_rank_sd, "test set"));
  write_chart(out_dir + "/ppl_vs_alpha.svg", "Reference perplexity vs alpha", "alpha", "perplexity",
              single(&SweepAggregate::ppl_mean, &SweepAggregate::ppl_sd, "test set"));

  auto per_beam = [&](auto mean_field, auto sd_field) {
    std::vector<Series> out;
    int ci = 0;
    for (int beam : beam_set) {
      Series s;
      s.label = "beam " + std::to_string(beam);
      s.color = kPalette[ci++ % 6];
      for (const SweepAggregate& a : aggs)
        if (a.beam == beam) {
          s.x.push_back(a.alpha);
          s.y.push_back(a.*mean_field);
          s.band.push_back(a.*sd_field);
        }
      out.push_back(std::move(s));
    }
    return out;
  };
  write_chart(out_dir + "/len_ratio_vs_alpha.svg", "Sentence-level length ratio vs alpha", "alpha",
              "reference length / generated length",
              per_beam(&SweepAggregate::len_ratio_mean, &SweepAggregate::len_ratio_sd));
  write_chart(out_dir + "/bleu_vs_alpha.svg", "Corpus BLEU vs alpha", "alpha", "BLEU",
              per_beam(&SweepAggregate::bleu_mean, &SweepAggregate::bleu_sd));
}

}  // namespace oversmooth
