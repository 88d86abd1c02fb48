//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chemlm/analysis/fragments.hpp"
#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/lm/sampling.hpp"

namespace chemlm {

// A numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(std::string_view name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name)
        return static_cast<int>(k);
    return -1;
  }

  std::vector<double> series(std::string_view name) const {
    int c = column(name);
    if (c < 0)
      throw Error(ErrorCode::kInvalidArgument, "missing column " + std::string(name));
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto &r: rows)
      out.push_back(r[c]);
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ','))
    out.push_back(f);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

inline CsvTable read_numeric_csv(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::kIo, path + " is empty");
  t.columns = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    auto fields = split_csv_line(line);
    if (fields.size() != t.columns.size())
      throw Error(ErrorCode::kIo, path + ": row width differs from header");
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string &f: fields) {
      char *end = nullptr;
      double v = std::strtod(f.c_str(), &end);
      row.push_back(end == f.c_str() ? std::numeric_limits<double>::quiet_NaN() : v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Mean of the first / last `window` entries.
inline double window_mean(const std::vector<double> &v, int window, bool tail) {
  if (v.empty())
    return std::numeric_limits<double>::quiet_NaN();
  std::size_t n = std::min(v.size(), static_cast<std::size_t>(window));
  double s = 0;
  for (std::size_t k = 0; k < n; ++k)
    s += tail ? v[v.size() - n + k] : v[k];
  return s / static_cast<double>(n);
}

inline constexpr int kTrendWindow = 10;

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};

// A standalone SVG line chart with its data embedded as CSV in <metadata>.
inline std::string line_plot_svg(const std::string &title, const std::vector<double> &x,
                                 const std::vector<PlotSeries> &series,
                                 const std::string &x_label = "step") {
  static constexpr const char *kColors[] = { "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                             "#bcbd22", "#17becf" };
  const double w = 720, h = 420, left = 60, right = 180, top = 40, bottom = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (double v: x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  for (const PlotSeries &s: series)
    for (double v: s.y)
      if (std::isfinite(v)) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
  if (!(xmax > xmin)) {
    xmin = std::isfinite(xmin) ? xmin - 1 : 0;
    xmax = xmin + 2;
  }
  if (!(ymax > ymin)) {
    ymin = std::isfinite(ymin) ? ymin - 1 : 0;
    ymax = ymin + 2;
  }
  auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * (w - left - right); };
  auto py = [&](double v) { return h - bottom - (v - ymin) / (ymax - ymin) * (h - top - bottom); };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<metadata>\n" << x_label;
  for (const PlotSeries &s: series)
    os << ',' << s.name;
  os << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << x[i];
    for (const PlotSeries &s: series)
      os << ',' << (i < s.y.size() ? s.y[i] : std::numeric_limits<double>::quiet_NaN());
    os << '\n';
  }
  os << "</metadata>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
     << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\""
     << h - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << h - bottom << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    double yv = ymin + (ymax - ymin) * k / 4.0, xv = xmin + (xmax - xmin) * k / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv
       << "</text>\n";
    os << "<text x=\"" << px(xv) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">"
       << xv << "</text>\n";
  }
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10
     << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char *color = kColors[s % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < x.size() && i < series[s].y.size(); ++i) {
      if (!std::isfinite(series[s].y[i]))
        continue;
      os << (first ? "" : " ") << px(x[i]) << ',' << py(series[s].y[i]);
      first = false;
    }
    os << "\"/>\n";
    double ly = top + 14 + 18 * static_cast<double>(s);
    os << "<line x1=\"" << w - right + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << w - right + 32
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << w - right + 38 << "\" y=\"" << ly << "\">" << series[s].name
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_text_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out)
    throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

struct ReportConfig {
  int sample_count = 256;
  int max_len = 0;  // 0 means the model's context length
  SpeConfig spe { 0, 10, 0 };
};

struct FragmentReport {
  MergeTable table;
  long min_freq = 0;
  int dropped = 0;
  int valid = 0;
  std::vector<SubstructureHighlight> highlights;
  std::vector<std::pair<std::string, int>> seg_counts;
};

inline std::string format_highlights_csv(const std::vector<SubstructureHighlight> &rows) {
  std::ostringstream os;
  os << "probe_label,segment,span_start,span_end,atom_indices,connected\n";
  for (const SubstructureHighlight &h: rows) {
    os << h.probe_label << ',' << h.segment << ',' << h.span_start << ',' << h.span_end << ',';
    for (std::size_t k = 0; k < h.atoms.size(); ++k)
      os << (k ? ";" : "") << h.atoms[k];
    os << ',' << (h.connected ? 1 : 0) << '\n';
  }
  return os.str();
}

// Writes into <run_dir>/analysis: fragment_metrics.csv and curve plots when
// the run has a metrics.csv, plus final_merges.tsv, highlights.csv and
// final_segments.csv and summary.txt from a fresh sample of `model`.
template <class S>
FragmentReport fragment_report(const std::string &run_dir, const Transformer<S> &model,
                               const Vocab &vocab, const std::vector<LabeledSmiles> &probes,
                               const ReportConfig &cfg) {
  namespace fs = std::filesystem;
  fs::path out_dir = fs::path(run_dir) / "analysis";
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw Error(ErrorCode::kIo, "cannot create " + out_dir.string());

  fs::path metrics = fs::path(run_dir) / "metrics.csv";
  if (fs::exists(metrics)) {
    CsvTable t = read_numeric_csv(metrics.string());
    std::vector<std::string> keep { "step", "n_highfreq" };
    for (const std::string &c: t.columns)
      if (c.starts_with("seg_"))
        keep.push_back(c);
    std::ostringstream os;
    os << std::setprecision(9);
    for (std::size_t k = 0; k < keep.size(); ++k)
      os << (k ? "," : "") << keep[k];
    os << '\n';
    std::vector<int> idx;
    for (const std::string &c: keep)
      idx.push_back(t.column(c));
    for (const auto &row: t.rows) {
      for (std::size_t k = 0; k < idx.size(); ++k)
        os << (k ? "," : "")
           << (idx[k] >= 0 ? row[idx[k]] : std::numeric_limits<double>::quiet_NaN());
      os << '\n';
    }
    write_text_file(out_dir / "fragment_metrics.csv", os.str());

    std::vector<double> steps = t.series("step");
    std::vector<PlotSeries> scores;
    for (const char *c: { "mean_score", "valid_mean_score", "top1" })
      if (t.column(c) >= 0)
        scores.push_back({ c, t.series(c) });
    write_text_file(out_dir / "scores.svg", line_plot_svg("Score curves", steps, scores));
    if (t.column("n_highfreq") >= 0)
      write_text_file(out_dir / "n_highfreq.svg",
                      line_plot_svg("High-frequency fragments", steps,
                                    { { "n_highfreq", t.series("n_highfreq") } }));
    std::vector<PlotSeries> segs;
    for (std::size_t k = 2; k < keep.size(); ++k)
      segs.push_back({ keep[k].substr(4), t.series(keep[k]) });
    if (!segs.empty())
      write_text_file(out_dir / "segments.svg",
                      line_plot_svg("Fragments to compose each probe", steps, segs));
  }

  const int max_len = cfg.max_len > 0 ? cfg.max_len : model.config().context_len;
  std::vector<SampledSequence> samples =
      sample(model, vocab, cfg.sample_count, derive_seed(cfg.spe.seed, "analysis/report/sample"),
             max_len);
  std::vector<std::string> smiles;
  FragmentReport rep;
  for (const SampledSequence &s: samples) {
    if (!is_valid_sample(s, vocab))
      continue;
    ++rep.valid;
    smiles.push_back(detokenize(s.tokens, vocab));
  }
  HighFreqResult hf = high_freq_count(smiles, cfg.spe.min_freq, cfg.spe.augment,
                                      derive_seed(cfg.spe.seed, "analysis/report/augment"));
  rep.table = hf.table;
  rep.min_freq = hf.min_freq;
  rep.dropped = hf.dropped;
  rep.highlights = locate_segments(hf.table, probes);
  for (const LabeledSmiles &p: probes)
    rep.seg_counts.emplace_back(p.label, probe_segment_count(p.smiles, hf.table));

  save_merges(rep.table, (out_dir / "final_merges.tsv").string());
  write_text_file(out_dir / "highlights.csv", format_highlights_csv(rep.highlights));
  std::ostringstream seg;
  seg << "probe_label,atomic_tokens,segments\n";
  for (std::size_t k = 0; k < probes.size(); ++k)
    seg << probes[k].label << ',' << atomic_token_count(probes[k].smiles) << ','
        << rep.seg_counts[k].second << '\n';
  write_text_file(out_dir / "final_segments.csv", seg.str());
  std::ostringstream summary;
  summary << "samples=" << cfg.sample_count << "\nvalid=" << rep.valid
          << "\naugment=" << cfg.spe.augment << "\nmin_freq=" << rep.min_freq
          << "\nmerges=" << rep.table.size() << "\nhighlights=" << rep.highlights.size() << '\n';
  write_text_file(out_dir / "summary.txt", summary.str());
  return rep;
}

}  // namespace chemlm
