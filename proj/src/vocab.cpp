#include "oversmooth/vocab.hpp"

#include <fstream>
#include <stdexcept>

namespace oversmooth {

namespace {
const char* kReserved[] = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumReserved)
    throw std::invalid_argument("Vocabulary: needs at least the 4 reserved tokens");
  for (int i = 0; i < kNumReserved; ++i)
    if (tokens_[i] != kReserved[i])
      throw std::invalid_argument("Vocabulary: reserved slot " + std::to_string(i) + " holds '" + tokens_[i] +
                                  "', expected '" + kReserved[i] + "'");
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second)
      throw std::invalid_argument("Vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::synthetic(const std::string& prefix, int size) {
  if (size < kNumReserved) throw std::invalid_argument("Vocabulary: size below reserved count");
  std::vector<std::string> toks(kReserved, kReserved + kNumReserved);
  for (int i = 0; i < size - kNumReserved; ++i) {
    std::string num = std::to_string(i);
    if (num.size() < 2) num = "0" + num;
    toks.push_back(prefix + num);
  }
  return Vocabulary(std::move(toks));
}

int Vocabulary::lookup(const std::string& surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? kUnk : it->second;
}

int Vocabulary::lookup_strict(const std::string& surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? -1 : it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("Vocabulary: cannot write " + path);
  for (const auto& t : tokens_) f << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("Vocabulary: cannot read " + path);
  std::vector<std::string> toks;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) toks.push_back(line);
  return Vocabulary(std::move(toks));
}

}  // namespace oversmooth
