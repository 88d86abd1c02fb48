//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/lm/model.hpp"
#include "chemlm/lm/optim.hpp"

namespace chemlm {

inline constexpr char kCheckpointMagic[4] = { 'C', 'L', 'M', '1' };
inline constexpr int kCheckpointVersion = 1;

namespace internal {

inline void put_u32(std::ostream &out, std::uint32_t x) {
  unsigned char b[4] = { static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                         static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24) };
  out.write(reinterpret_cast<const char *>(b), 4);
}

inline bool get_u32(std::istream &in, std::uint32_t &x) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char *>(b), 4))
    return false;
  x = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
      | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

template <class S>
void put_array(std::ostream &out, const std::string &name, int rows, int cols, const S *data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  const bool matrix = rows != 1;
  put_u32(out, matrix ? 2 : 1);
  if (matrix)
    put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  std::vector<std::uint32_t> raw(n);
  for (std::size_t k = 0; k < n; ++k)
    raw[k] = std::bit_cast<std::uint32_t>(static_cast<float>(data[k]));
  if constexpr (std::endian::native == std::endian::big)
    for (auto &w: raw)
      w = (w >> 24) | ((w >> 8) & 0xFF00U) | ((w << 8) & 0xFF0000U) | (w << 24);
  out.write(reinterpret_cast<const char *>(raw.data()),
            static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
}

struct ArrayRecord {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

inline std::string read_name(std::istream &in, const std::string &path) {
  std::uint32_t len;
  if (!get_u32(in, len) || len > 4096)
    throw Error(ErrorCode::kIo, path + ": truncated array record");
  std::string name(len, '\0');
  if (!in.read(name.data(), len))
    throw Error(ErrorCode::kIo, path + ": truncated array record");
  return name;
}

inline ArrayRecord read_array(std::istream &in, const std::string &path) {
  ArrayRecord rec;
  std::uint32_t rank;
  if (!get_u32(in, rank) || rank < 1 || rank > 2)
    throw Error(ErrorCode::kIo, path + ": bad array rank");
  std::size_t n = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    std::uint32_t dim;
    if (!get_u32(in, dim))
      throw Error(ErrorCode::kIo, path + ": truncated array header");
    rec.dims.push_back(dim);
    n *= dim;
  }
  std::vector<std::uint32_t> raw(n);
  if (!in.read(reinterpret_cast<char *>(raw.data()),
               static_cast<std::streamsize>(n * sizeof(std::uint32_t))))
    throw Error(ErrorCode::kIo, path + ": truncated array data");
  if constexpr (std::endian::native == std::endian::big)
    for (auto &w: raw)
      w = (w >> 24) | ((w >> 8) & 0xFF00U) | ((w << 8) & 0xFF0000U) | (w << 24);
  rec.data.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    rec.data[k] = std::bit_cast<float>(raw[k]);
  return rec;
}

}  // namespace internal

struct CheckpointHeader {
  ModelConfig config;
  std::size_t parameter_count = 0;
  int format_version = kCheckpointVersion;
  bool has_optimizer = false;
  std::map<std::string, std::string> extra;  // free-form run metadata
};

template <class S>
struct Checkpoint {
  Transformer<S> model;
  std::optional<AdamState<S>> optimizer;
  CheckpointHeader header;
};

inline std::string format_header(const CheckpointHeader &h) {
  std::ostringstream os;
  os.precision(17);
  os << "format_version=" << h.format_version << '\n'
     << "n_layers=" << h.config.n_layers << '\n'
     << "d_model=" << h.config.d_model << '\n'
     << "n_heads=" << h.config.n_heads << '\n'
     << "d_ff=" << h.config.d_ff << '\n'
     << "context_len=" << h.config.context_len << '\n'
     << "vocab_size=" << h.config.vocab_size << '\n'
     << "tie_weights=" << (h.config.tie_weights ? 1 : 0) << '\n'
     << "parameter_count=" << h.parameter_count << '\n'
     << "has_optimizer=" << (h.has_optimizer ? 1 : 0) << '\n';
  for (const auto &[k, v]: h.extra)
    os << k << '=' << v << '\n';
  return os.str();
}

// Writes to a temporary sibling and renames, so readers never see a
// partial file.
template <class S>
void save_checkpoint(const std::string &path, const Transformer<S> &model,
                     const AdamState<S> *opt = nullptr,
                     const std::map<std::string, std::string> &extra = {}) {
  CheckpointHeader h;
  h.config = model.config();
  h.parameter_count = model.num_parameters();
  h.has_optimizer = opt != nullptr;
  h.extra = extra;
  if (opt) {
    std::ostringstream os;
    os.precision(17);
    auto put = [&](const std::string &k, auto v) {
      os.str("");
      os << v;
      h.extra[k] = os.str();
    };
    put("opt.step", opt->step);
    put("opt.beta1", opt->beta1);
    put("opt.beta2", opt->beta2);
    put("opt.eps", opt->eps);
    put("opt.schedule", opt->schedule.kind == LrSchedule::Kind::kCosine ? "cosine" : "constant");
    put("opt.peak_lr", opt->schedule.peak);
    put("opt.total_steps", opt->schedule.total_steps);
    put("opt.final_fraction", opt->schedule.final_fraction);
    put("opt.warmup_steps", opt->schedule.warmup_steps);
  }
  std::string text = format_header(h);

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::kIo, "cannot write checkpoint " + tmp);
    out.write(kCheckpointMagic, 4);
    internal::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    const ModelLayout &lay = model.layout();
    for (const TensorSpec &t: lay.tensors)
      internal::put_array(out, t.name, t.rows, t.cols, model.params().data() + t.offset);
    if (opt) {
      internal::put_array(out, "opt.m", 1, static_cast<int>(opt->m.size()), opt->m.data());
      internal::put_array(out, "opt.v", 1, static_cast<int>(opt->v.size()), opt->v.data());
    }
    if (!out)
      throw Error(ErrorCode::kIo, "failed writing checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error(ErrorCode::kIo, "cannot move checkpoint into place at " + path);
}

inline CheckpointHeader parse_header(const std::string &text, const std::string &path) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kFormatVersionMismatch, path + ": malformed header line");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const std::string &key) -> long long {
    auto it = kv.find(key);
    if (it == kv.end())
      throw Error(ErrorCode::kFormatVersionMismatch, path + ": header lacks " + key);
    try {
      long long value = std::stoll(it->second);
      kv.erase(it);
      return value;
    } catch (const std::exception &) {
      throw Error(ErrorCode::kFormatVersionMismatch, path + ": bad value for " + key);
    }
  };
  CheckpointHeader h;
  h.format_version = static_cast<int>(take("format_version"));
  if (h.format_version != kCheckpointVersion)
    throw Error(ErrorCode::kFormatVersionMismatch,
                path + ": format version " + std::to_string(h.format_version));
  h.config.n_layers = static_cast<int>(take("n_layers"));
  h.config.d_model = static_cast<int>(take("d_model"));
  h.config.n_heads = static_cast<int>(take("n_heads"));
  h.config.d_ff = static_cast<int>(take("d_ff"));
  h.config.context_len = static_cast<int>(take("context_len"));
  h.config.vocab_size = static_cast<int>(take("vocab_size"));
  h.config.tie_weights = take("tie_weights") != 0;
  h.parameter_count = static_cast<std::size_t>(take("parameter_count"));
  h.has_optimizer = take("has_optimizer") != 0;
  h.extra = std::move(kv);
  return h;
}

inline CheckpointHeader read_checkpoint_header(std::istream &in, const std::string &path) {
  char magic[4];
  if (!in.read(magic, 4))
    throw Error(ErrorCode::kIo, path + ": file too short");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw Error(ErrorCode::kFormatVersionMismatch, path + ": not a CLM1 checkpoint");
  std::uint32_t len;
  if (!internal::get_u32(in, len) || len > (1U << 20))
    throw Error(ErrorCode::kIo, path + ": truncated header");
  std::string text(len, '\0');
  if (!in.read(text.data(), len))
    throw Error(ErrorCode::kIo, path + ": truncated header");
  return parse_header(text, path);
}

template <class S = float>
Checkpoint<S> load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read checkpoint " + path);
  CheckpointHeader h = read_checkpoint_header(in, path);
  try {
    h.config.validate();
  } catch (const Error &e) {
    throw Error(ErrorCode::kShapeMismatch, path + ": " + e.what());
  }
  Checkpoint<S> ck { Transformer<S>(h.config), std::nullopt, h };
  if (parameter_count(h.config) != h.parameter_count)
    throw Error(ErrorCode::kShapeMismatch, path + ": parameter_count disagrees with config");

  for (const TensorSpec &t: ck.model.layout().tensors) {
    std::string name = internal::read_name(in, path);
    if (name != t.name)
      throw Error(ErrorCode::kShapeMismatch, path + ": expected array " + t.name + ", found "
                                                 + name);
    internal::ArrayRecord rec = internal::read_array(in, path);
    std::size_t n = rec.data.size();
    bool shape_ok = n == t.size()
                    && (rec.dims.size() == 2 ? rec.dims[0] == static_cast<std::uint32_t>(t.rows)
                                             : t.rows == 1);
    if (!shape_ok)
      throw Error(ErrorCode::kShapeMismatch, path + ": array " + t.name + " has wrong shape");
    for (std::size_t k = 0; k < n; ++k)
      ck.model.params()[t.offset + k] = static_cast<S>(rec.data[k]);
  }
  if (h.has_optimizer) {
    auto num = [&](const std::string &key) {
      auto it = h.extra.find(key);
      if (it == h.extra.end())
        throw Error(ErrorCode::kFormatVersionMismatch, path + ": header lacks " + key);
      return std::stod(it->second);
    };
    AdamState<S> opt;
    opt.step = static_cast<long>(num("opt.step"));
    opt.beta1 = num("opt.beta1");
    opt.beta2 = num("opt.beta2");
    opt.eps = num("opt.eps");
    opt.schedule.kind = h.extra.at("opt.schedule") == "cosine" ? LrSchedule::Kind::kCosine
                                                                : LrSchedule::Kind::kConstant;
    opt.schedule.peak = num("opt.peak_lr");
    opt.schedule.total_steps = static_cast<long>(num("opt.total_steps"));
    opt.schedule.final_fraction = num("opt.final_fraction");
    opt.schedule.warmup_steps = static_cast<long>(num("opt.warmup_steps"));
    for (auto *moment: { &opt.m, &opt.v }) {
      std::string name = internal::read_name(in, path);
      if (name != (moment == &opt.m ? "opt.m" : "opt.v"))
        throw Error(ErrorCode::kShapeMismatch, path + ": unexpected array " + name);
      internal::ArrayRecord rec = internal::read_array(in, path);
      if (rec.data.size() != ck.model.num_parameters())
        throw Error(ErrorCode::kShapeMismatch, path + ": optimizer moments have wrong size");
      moment->assign(rec.data.begin(), rec.data.end());
    }
    ck.optimizer = std::move(opt);
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::kFormatVersionMismatch, path + ": trailing bytes after last array");
  return ck;
}

}  // namespace chemlm
