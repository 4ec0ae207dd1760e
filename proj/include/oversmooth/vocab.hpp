#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace oversmooth {

// Closed token inventory. Indices 0-3 are reserved in fixed order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  // Reserved tokens plus `size - 4` content tokens named `<prefix>00`,
  // `<prefix>01`, ... (two digits minimum).
  static Vocabulary synthetic(const std::string& prefix, int size);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& surface(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Unknown surface forms map to <unk>.
  int lookup(const std::string& surface) const;
  // Returns -1 for unknown surface forms (corpus loading treats that as
  // a hard error).
  int lookup_strict(const std::string& surface) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace oversmooth
