//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/lm/config.hpp"
#include "chemlm/pipeline/finetune.hpp"
#include "chemlm/pipeline/pretrain.hpp"

namespace chemlm {

// Sections of key=value pairs, in file order. Keys before the first
// section header belong to the unnamed global section "".
struct IniFile {
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };
  std::vector<std::pair<std::string, std::vector<Entry>>> sections;
};

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Full-line comments start with '#' or ';'.
inline IniFile parse_ini(std::istream &in, const std::string &origin) {
  IniFile ini;
  ini.sections.emplace_back("", std::vector<IniFile::Entry> {});
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';')
      continue;
    auto where = [&] { return origin + ":" + std::to_string(lineno) + ": "; };
    if (t.front() == '[') {
      if (t.back() != ']')
        throw Error(ErrorCode::kConfig, where() + "unterminated section header");
      std::string name = trim(std::string_view(t).substr(1, t.size() - 2));
      if (name.empty())
        throw Error(ErrorCode::kConfig, where() + "empty section name");
      for (const auto &s: ini.sections)
        if (s.first == name)
          throw Error(ErrorCode::kConfig, where() + "duplicate section [" + name + "]");
      ini.sections.emplace_back(name, std::vector<IniFile::Entry> {});
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kConfig, where() + "expected key = value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty())
      throw Error(ErrorCode::kConfig, where() + "empty key");
    auto &entries = ini.sections.back().second;
    for (const auto &e: entries)
      if (e.key == key)
        throw Error(ErrorCode::kConfig, where() + "duplicate key " + key);
    entries.push_back({ key, trim(std::string_view(t).substr(eq + 1)), lineno });
  }
  return ini;
}

struct DataSettings {
  std::string corpus;
  std::string vocab;
  int max_tokens = 100;
  bool exclude_targets = true;
};

struct ModelSettings {
  std::string preset = "desk";
  int n_layers = 4;
  int d_model = 128;
  int n_heads = 4;
  int d_ff = 512;
  int context_len = 128;
  bool tie_weights = false;

  ModelConfig to_config(int vocab_size) const {
    ModelConfig c;
    c.n_layers = n_layers;
    c.d_model = d_model;
    c.n_heads = n_heads;
    c.d_ff = d_ff;
    c.context_len = context_len;
    c.vocab_size = vocab_size;
    c.tie_weights = tie_weights;
    return c;
  }
};

struct FinetuneSettings {
  std::string preset = "desk";
  std::string prior;
  std::string task = "celecoxib";
  bool track_fragments = true;
  FinetuneConfig cfg;
};

struct SpeSettings {
  long min_freq = 0;  // 0 selects the scaled threshold
  int augment = 10;  // randomized copies per sampled string
};

struct AnalysisSettings {
  std::string checkpoint;  // empty: the run's agent checkpoint
  int sample_count = 256;
  int augment = 10;
  long min_freq = 0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::string out_dir = "runs/default";
  DataSettings data;
  ModelSettings model;
  std::string pretrain_preset = "desk";
  PretrainConfig pretrain;
  FinetuneSettings finetune;
  SpeSettings spe;
  AnalysisSettings analysis;
};

// Per-stage seeds: derive_seed(seed, "<stage>") for stages "init",
// "pretrain", "finetune", "spe", "analysis" and "sample".
inline std::uint64_t stage_seed(const RunConfig &rc, std::string_view stage) {
  return derive_seed(rc.seed, stage);
}

namespace internal {

template <class T>
T parse_number(const std::string &text, const std::string &what) {
  T v {};
  const char *b = text.data(), *e = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw Error(ErrorCode::kConfig, what + ": not a number: '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string &text, const std::string &what) {
  if (text == "true" || text == "1" || text == "yes" || text == "on")
    return true;
  if (text == "false" || text == "0" || text == "no" || text == "off")
    return false;
  throw Error(ErrorCode::kConfig, what + ": not a boolean: '" + text + "'");
}

inline std::string resolve_path(const std::string &p, const std::filesystem::path &base) {
  if (p.empty())
    return p;
  std::filesystem::path path(p);
  if (path.is_relative())
    path = base / path;
  return std::filesystem::absolute(path).lexically_normal().string();
}

using Setter = std::function<void(RunConfig &, const std::string &, const std::string &)>;

template <class T, class Get>
Setter number(Get get) {
  return [get](RunConfig &rc, const std::string &v, const std::string &what) {
    get(rc) = parse_number<T>(v, what);
  };
}

template <class Get>
Setter boolean(Get get) {
  return [get](RunConfig &rc, const std::string &v, const std::string &what) {
    get(rc) = parse_bool(v, what);
  };
}

template <class Get>
Setter text(Get get) {
  return [get](RunConfig &rc, const std::string &v, const std::string &) { get(rc) = v; };
}

template <class Get>
Setter path(Get get, std::filesystem::path base) {
  return [get, base](RunConfig &rc, const std::string &v, const std::string &) {
    get(rc) = resolve_path(v, base);
  };
}

inline void apply_model_preset(ModelSettings &m, const std::string &name) {
  ModelConfig c;
  if (name == "desk")
    c = desk_model_config(1);
  else if (name == "paper")
    c = paper_model_config(1);
  else
    throw Error(ErrorCode::kConfig, "model.preset: unknown preset '" + name + "'");
  m.preset = name;
  m.n_layers = c.n_layers;
  m.d_model = c.d_model;
  m.n_heads = c.n_heads;
  m.d_ff = c.d_ff;
  m.context_len = c.context_len;
  m.tie_weights = c.tie_weights;
}

inline void apply_pretrain_preset(RunConfig &rc, const std::string &name) {
  if (name == "desk")
    rc.pretrain = PretrainConfig::desk();
  else if (name == "paper")
    rc.pretrain = PretrainConfig::paper();
  else
    throw Error(ErrorCode::kConfig, "pretrain.preset: unknown preset '" + name + "'");
  rc.pretrain_preset = name;
}

inline void apply_finetune_preset(FinetuneSettings &f, const std::string &name) {
  if (name == "desk")
    f.cfg = FinetuneConfig::desk();
  else if (name == "paper")
    f.cfg = FinetuneConfig::paper();
  else
    throw Error(ErrorCode::kConfig, "finetune.preset: unknown preset '" + name + "'");
  f.preset = name;
}

// section -> key -> setter; paths resolve against `base`.
inline std::map<std::string, std::map<std::string, Setter>>
config_schema(const std::filesystem::path &base) {
  using R = RunConfig;
  std::map<std::string, std::map<std::string, Setter>> s;
  s[""] = {
    { "seed", number<std::uint64_t>([](R &r) -> auto & { return r.seed; }) },
    { "deterministic", boolean([](R &r) -> auto & { return r.deterministic; }) },
    { "out_dir", path([](R &r) -> auto & { return r.out_dir; }, base) },
  };
  s["data"] = {
    { "corpus", path([](R &r) -> auto & { return r.data.corpus; }, base) },
    { "vocab", path([](R &r) -> auto & { return r.data.vocab; }, base) },
    { "max_tokens", number<int>([](R &r) -> auto & { return r.data.max_tokens; }) },
    { "exclude_targets", boolean([](R &r) -> auto & { return r.data.exclude_targets; }) },
  };
  s["model"] = {
    { "preset", [](R &r, const std::string &v, const std::string &) {
       apply_model_preset(r.model, v);
     } },
    { "n_layers", number<int>([](R &r) -> auto & { return r.model.n_layers; }) },
    { "d_model", number<int>([](R &r) -> auto & { return r.model.d_model; }) },
    { "n_heads", number<int>([](R &r) -> auto & { return r.model.n_heads; }) },
    { "d_ff", number<int>([](R &r) -> auto & { return r.model.d_ff; }) },
    { "context_len", number<int>([](R &r) -> auto & { return r.model.context_len; }) },
    { "tie_weights", boolean([](R &r) -> auto & { return r.model.tie_weights; }) },
  };
  s["pretrain"] = {
    { "preset", [](R &r, const std::string &v, const std::string &) {
       apply_pretrain_preset(r, v);
     } },
    { "epochs", number<int>([](R &r) -> auto & { return r.pretrain.epochs; }) },
    { "batch_size", number<int>([](R &r) -> auto & { return r.pretrain.batch_size; }) },
    { "peak_lr", number<double>([](R &r) -> auto & { return r.pretrain.peak_lr; }) },
    { "final_fraction", number<double>([](R &r) -> auto & { return r.pretrain.final_fraction; }) },
    { "warmup_steps", number<int>([](R &r) -> auto & { return r.pretrain.warmup_steps; }) },
    { "valid_ratio_sample",
      number<int>([](R &r) -> auto & { return r.pretrain.valid_ratio_sample; }) },
    { "sample_max_len", number<int>([](R &r) -> auto & { return r.pretrain.sample_max_len; }) },
  };
  s["finetune"] = {
    { "preset", [](R &r, const std::string &v, const std::string &) {
       apply_finetune_preset(r.finetune, v);
     } },
    { "prior", path([](R &r) -> auto & { return r.finetune.prior; }, base) },
    { "task", text([](R &r) -> auto & { return r.finetune.task; }) },
    { "track_fragments", boolean([](R &r) -> auto & { return r.finetune.track_fragments; }) },
    { "steps", number<int>([](R &r) -> auto & { return r.finetune.cfg.steps; }) },
    { "batch", number<int>([](R &r) -> auto & { return r.finetune.cfg.batch; }) },
    { "lr", number<double>([](R &r) -> auto & { return r.finetune.cfg.lr; }) },
    { "sigma", number<double>([](R &r) -> auto & { return r.finetune.cfg.sigma; }) },
    { "max_sample_len", number<int>([](R &r) -> auto & { return r.finetune.cfg.max_sample_len; }) },
    { "memory_capacity",
      number<int>([](R &r) -> auto & { return r.finetune.cfg.memory_capacity; }) },
    { "temperature", number<double>([](R &r) -> auto & { return r.finetune.cfg.temperature; }) },
  };
  s["spe"] = {
    { "min_freq", number<long>([](R &r) -> auto & { return r.spe.min_freq; }) },
    { "augment", number<int>([](R &r) -> auto & { return r.spe.augment; }) },
  };
  s["analysis"] = {
    { "checkpoint", path([](R &r) -> auto & { return r.analysis.checkpoint; }, base) },
    { "sample_count", number<int>([](R &r) -> auto & { return r.analysis.sample_count; }) },
    { "augment", number<int>([](R &r) -> auto & { return r.analysis.augment; }) },
    { "min_freq", number<long>([](R &r) -> auto & { return r.analysis.min_freq; }) },
  };
  return s;
}

}  // namespace internal

// Applies `ini` on top of `rc`. Presets apply before the other keys of
// their section; unknown sections and keys are rejected.
inline void apply_ini(RunConfig &rc, const IniFile &ini, const std::filesystem::path &base,
                      const std::string &origin) {
  auto schema = internal::config_schema(base);
  for (const auto &[section, entries]: ini.sections) {
    auto sit = schema.find(section);
    if (sit == schema.end())
      throw Error(ErrorCode::kConfig, origin + ": unknown section [" + section + "]");
    for (int pass = 0; pass < 2; ++pass)
      for (const IniFile::Entry &e: entries) {
        if ((e.key == "preset") != (pass == 0))
          continue;
        std::string what = origin + ":" + std::to_string(e.line) + ": "
                           + (section.empty() ? "" : section + ".") + e.key;
        auto kit = sit->second.find(e.key);
        if (kit == sit->second.end())
          throw Error(ErrorCode::kConfig, what + ": unknown key");
        kit->second(rc, e.value, what);
      }
  }
}

inline void validate_run_config(const RunConfig &rc) {
  rc.pretrain.validate();
  rc.finetune.cfg.validate();
  if (rc.data.max_tokens < 1)
    throw Error(ErrorCode::kConfig, "data.max_tokens must be positive");
  if (rc.spe.min_freq < 0 || rc.spe.augment < 0 || rc.analysis.augment < 0
      || rc.analysis.min_freq < 0 || rc.analysis.sample_count < 1)
    throw Error(ErrorCode::kConfig, "spe/analysis settings must be non-negative");
  try {
    rc.model.to_config(1).validate();
  } catch (const Error &e) {
    throw Error(ErrorCode::kConfig, std::string("model: ") + e.what());
  }
  if (rc.data.max_tokens + 2 > rc.model.context_len)
    throw Error(ErrorCode::kConfig, "model.context_len must exceed data.max_tokens + 1");
}

inline RunConfig load_run_config(const std::string &path, RunConfig rc = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kConfig, "cannot read config " + path);
  IniFile ini = parse_ini(in, path);
  apply_ini(rc, ini, std::filesystem::absolute(path).parent_path(), path);
  return rc;
}

// Every setting, in a form load_run_config reads back to the same values.
inline std::string format_run_config(const RunConfig &rc) {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "seed = " << rc.seed << '\n'
     << "deterministic = " << b(rc.deterministic) << '\n'
     << "out_dir = " << rc.out_dir << '\n'
     << "\n[data]\n"
     << "corpus = " << rc.data.corpus << '\n'
     << "vocab = " << rc.data.vocab << '\n'
     << "max_tokens = " << rc.data.max_tokens << '\n'
     << "exclude_targets = " << b(rc.data.exclude_targets) << '\n'
     << "\n[model]\n"
     << "n_layers = " << rc.model.n_layers << '\n'
     << "d_model = " << rc.model.d_model << '\n'
     << "n_heads = " << rc.model.n_heads << '\n'
     << "d_ff = " << rc.model.d_ff << '\n'
     << "context_len = " << rc.model.context_len << '\n'
     << "tie_weights = " << b(rc.model.tie_weights) << '\n'
     << "\n[pretrain]\n"
     << "epochs = " << rc.pretrain.epochs << '\n'
     << "batch_size = " << rc.pretrain.batch_size << '\n'
     << "peak_lr = " << rc.pretrain.peak_lr << '\n'
     << "final_fraction = " << rc.pretrain.final_fraction << '\n'
     << "warmup_steps = " << rc.pretrain.warmup_steps << '\n'
     << "valid_ratio_sample = " << rc.pretrain.valid_ratio_sample << '\n'
     << "sample_max_len = " << rc.pretrain.sample_max_len << '\n'
     << "\n[finetune]\n"
     << "prior = " << rc.finetune.prior << '\n'
     << "task = " << rc.finetune.task << '\n'
     << "track_fragments = " << b(rc.finetune.track_fragments) << '\n'
     << "steps = " << rc.finetune.cfg.steps << '\n'
     << "batch = " << rc.finetune.cfg.batch << '\n'
     << "lr = " << rc.finetune.cfg.lr << '\n'
     << "sigma = " << rc.finetune.cfg.sigma << '\n'
     << "max_sample_len = " << rc.finetune.cfg.max_sample_len << '\n'
     << "memory_capacity = " << rc.finetune.cfg.memory_capacity << '\n'
     << "temperature = " << rc.finetune.cfg.temperature << '\n'
     << "\n[spe]\n"
     << "min_freq = " << rc.spe.min_freq << '\n'
     << "augment = " << rc.spe.augment << '\n'
     << "\n[analysis]\n"
     << "checkpoint = " << rc.analysis.checkpoint << '\n'
     << "sample_count = " << rc.analysis.sample_count << '\n'
     << "augment = " << rc.analysis.augment << '\n'
     << "min_freq = " << rc.analysis.min_freq << '\n';
  return os.str();
}

}  // namespace chemlm
