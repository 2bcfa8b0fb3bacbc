#include "tkgr/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "tkgr/common.hpp"

namespace tkgr {

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::uint32_t Vocab::intern(const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  if (frozen_) return require(name);  // throws with suggestions
  std::uint32_t id = static_cast<std::uint32_t>(names_.size());
  names_.push_back(name);
  ids_.emplace(name, id);
  return id;
}

std::uint32_t Vocab::require(const std::string& name) const {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  std::string msg = "unknown name '" + name + "'";
  auto close = nearest(name, 3);
  if (!close.empty()) {
    msg += "; closest known:";
    for (const auto& c : close) msg += " '" + c + "'";
  }
  fail(ErrorKind::vocab, msg);
}

std::optional<std::uint32_t> Vocab::find(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::name(std::uint32_t id) const {
  if (id >= names_.size()) fail(ErrorKind::contract, strf("vocab id %u out of range", id));
  return names_[id];
}

std::vector<std::string> Vocab::nearest(const std::string& name, std::size_t k) const {
  std::vector<std::pair<std::size_t, std::uint32_t>> scored;
  scored.reserve(names_.size());
  for (std::uint32_t i = 0; i < names_.size(); ++i)
    scored.emplace_back(edit_distance(name, names_[i]), i);
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i)
    out.push_back(names_[scored[i].second]);
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write vocab file " + path);
  for (std::uint32_t i = 0; i < names_.size(); ++i)
    out << i << '\t' << names_[i] << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot read vocab file " + path);
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorKind::parse, strf("%s:%zu: expected id<TAB>name", path.c_str(), lineno));
    std::uint32_t id = 0;
    try {
      id = static_cast<std::uint32_t>(std::stoul(line.substr(0, tab)));
    } catch (...) {
      fail(ErrorKind::parse, strf("%s:%zu: bad id field", path.c_str(), lineno));
    }
    if (id != v.names_.size())
      fail(ErrorKind::parse, strf("%s:%zu: ids must be dense and in order", path.c_str(), lineno));
    std::string name = line.substr(tab + 1);
    if (v.ids_.count(name))
      fail(ErrorKind::parse, strf("%s:%zu: duplicate name", path.c_str(), lineno));
    v.ids_.emplace(name, id);
    v.names_.push_back(std::move(name));
  }
  v.freeze();
  return v;
}

}  // namespace tkgr
