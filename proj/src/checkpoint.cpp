#include "oversmooth/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace oversmooth {

namespace {

constexpr const char* kMagic = "osmckpt";
constexpr int kVersion = 1;

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot write " + path);
  f << kMagic << " version=" << kVersion << " d_embed=" << params.config.d_embed
    << " d_hidden=" << params.config.d_hidden << " dropout=" << fmt_double(params.config.dropout_rate)
    << " vocab_src=" << params.config.vocab_src << " vocab_tgt=" << params.config.vocab_tgt
    << " seed=" << params.config.seed << " update_count=" << params.update_count
    << " alpha=" << fmt_double(params.alpha) << "\n";
  for (const auto& [name, t] : params.tensors) {
    f << name << "\n" << t.rows << " " << t.cols << "\n";
    f.write(reinterpret_cast<const char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!f) throw CheckpointError("checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointCorrupt("checkpoint: cannot read " + path);
  std::string header;
  if (!std::getline(f, header)) throw CheckpointCorrupt("checkpoint: missing header in " + path);

  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != kMagic) throw CheckpointCorrupt("checkpoint: bad magic '" + magic + "' in " + path);

  ModelParams p;
  int version = -1;
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CheckpointCorrupt("checkpoint: malformed header field '" + kv + "'");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    try {
      if (key == "version") version = std::stoi(val);
      else if (key == "d_embed") p.config.d_embed = std::stoi(val);
      else if (key == "d_hidden") p.config.d_hidden = std::stoi(val);
      else if (key == "dropout") p.config.dropout_rate = std::stod(val);
      else if (key == "vocab_src") p.config.vocab_src = std::stoi(val);
      else if (key == "vocab_tgt") p.config.vocab_tgt = std::stoi(val);
      else if (key == "seed") p.config.seed = std::stoull(val);
      else if (key == "update_count") p.update_count = std::stoull(val);
      else if (key == "alpha") p.alpha = std::stod(val);
      else throw CheckpointCorrupt("checkpoint: unknown header key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw CheckpointCorrupt("checkpoint: unparsable header value '" + kv + "'");
    }
  }
  if (version != kVersion)
    throw CheckpointVersion("checkpoint: unsupported version " + std::to_string(version) + " (supported: " +
                            std::to_string(kVersion) + ")");

  const auto expected = param_shapes(p.config);
  std::map<std::string, std::pair<int, int>> expect_map(expected.begin(), expected.end());

  std::string name;
  while (std::getline(f, name)) {
    if (name.empty()) continue;
    std::string shape_line;
    if (!std::getline(f, shape_line)) throw CheckpointCorrupt("checkpoint: missing shape line for tensor " + name);
    int rows = 0, cols = 0;
    if (std::sscanf(shape_line.c_str(), "%d %d", &rows, &cols) != 2 || rows <= 0 || cols <= 0)
      throw CheckpointCorrupt("checkpoint: bad shape line '" + shape_line + "' for tensor " + name);

    auto it = expect_map.find(name);
    if (it == expect_map.end()) throw CheckpointShape("checkpoint: unexpected tensor '" + name + "'");
    if (it->second != std::make_pair(rows, cols))
      throw CheckpointShape("checkpoint: tensor " + name + " is " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", header config implies " + std::to_string(it->second.first) +
                            "x" + std::to_string(it->second.second));

    Tensor t(rows, cols);
    f.read(reinterpret_cast<char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (f.gcount() != static_cast<std::streamsize>(t.v.size() * sizeof(double)))
      throw CheckpointCorrupt("checkpoint: truncated payload for tensor " + name);
    p.tensors.emplace(name, std::move(t));
    expect_map.erase(it);
  }
  if (!expect_map.empty())
    throw CheckpointCorrupt("checkpoint: missing tensor '" + expect_map.begin()->first + "'");
  return p;
}

ModelParams load_checkpoint(const std::string& path, const Vocabulary& src, const Vocabulary& tgt) {
  ModelParams p = load_checkpoint(path);
  if (p.config.vocab_src != src.size())
    throw CheckpointShape("checkpoint: source vocabulary size " + std::to_string(p.config.vocab_src) +
                          " vs supplied " + std::to_string(src.size()));
  if (p.config.vocab_tgt != tgt.size())
    throw CheckpointShape("checkpoint: target vocabulary size " + std::to_string(p.config.vocab_tgt) +
                          " vs supplied " + std::to_string(tgt.size()));
  return p;
}

}  // namespace oversmooth
