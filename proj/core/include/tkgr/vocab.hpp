#pragma once

// Bidirectional string <-> dense-id mapping for entities and relations.
// Build mode interns new names; frozen mode rejects unknown names with
// nearest-name suggestions.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace tkgr {

class Vocab {
 public:
  // Returns the id, interning the name when unseen (build mode only).
  std::uint32_t intern(const std::string& name);

  // Frozen-safe lookup; throws a vocab error with suggestions when missing.
  std::uint32_t require(const std::string& name) const;

  std::optional<std::uint32_t> find(const std::string& name) const;
  const std::string& name(std::uint32_t id) const;
  std::size_t size() const { return names_.size(); }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // Closest names by edit distance, for error messages.
  std::vector<std::string> nearest(const std::string& name, std::size_t k) const;

  void save(const std::string& path) const;  // id \t name per line
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  bool frozen_ = false;
};

}  // namespace tkgr
