#include "tkgr/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "tkgr/common.hpp"

namespace tkgr {

ad::Var ParameterStore::insert_raw(const std::string& name, Tensor value) {
  auto var = ad::leaf(std::move(value), /*requires_grad=*/true);
  by_name_.emplace(name, var);
  order_.push_back(name);
  return var;
}

ad::Var ParameterStore::create(const std::string& name, const std::vector<std::size_t>& shape,
                               Rng& rng, double scale) {
  if (auto it = by_name_.find(name); it != by_name_.end()) {
    if (it->second->value.shape() != shape)
      fail(ErrorKind::integrity,
           strf("parameter '%s' has shape mismatch between checkpoint and model", name.c_str()));
    return it->second;
  }
  Tensor t(shape);
  double s = scale;
  if (s <= 0.0) {
    const std::size_t fan_out = shape.empty() ? 1 : shape.front();
    const std::size_t fan_in = shape.empty() ? 1 : shape.back();
    s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  }
  for (auto& x : t.data()) x = rng.uniform(-s, s);
  return insert_raw(name, std::move(t));
}

ad::Var ParameterStore::zeros(const std::string& name, const std::vector<std::size_t>& shape) {
  if (auto it = by_name_.find(name); it != by_name_.end()) {
    if (it->second->value.shape() != shape)
      fail(ErrorKind::integrity,
           strf("parameter '%s' has shape mismatch between checkpoint and model", name.c_str()));
    return it->second;
  }
  return insert_raw(name, Tensor(shape));
}

ad::Var ParameterStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end())
    fail(ErrorKind::contract, strf("unknown parameter '%s'", name.c_str()));
  return it->second;
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, v] : by_name_) n += v->value.size();
  return n;
}

void AdamOptimizer::attach(const ad::Var& param) {
  params_.push_back(param);
  m_.emplace_back(param->value.shape());
  v_.emplace_back(param->value.shape());
}

void AdamOptimizer::attach_all(const ParameterStore& store) {
  for (const auto& name : store.names()) attach(store.get(name));
}

double AdamOptimizer::step(const ad::GradMap& grads) {
  std::vector<Tensor> gs;
  gs.reserve(params_.size());
  double sq_norm = 0.0;
  for (const auto& p : params_) {
    Tensor g = ad::grad_of(grads, p);
    for (double x : g.data()) sq_norm += x * x;
    gs.push_back(std::move(g));
  }
  const double norm = std::sqrt(sq_norm);
  if (clip_norm > 0.0 && norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (auto& g : gs)
      for (auto& x : g.data()) x *= scale;
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i]->value;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = gs[i][j];
      m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g;
      v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  return norm;
}

namespace {

constexpr char kMagic[8] = {'T', 'K', 'G', 'R', 'C', 'K', 'P', 'T'};
constexpr char kFooter[8] = {'T', 'K', 'G', 'R', 'E', 'N', 'D', '!'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_str(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::ifstream in;
  std::string context = "header";

  [[noreturn]] void corrupt(const char* what) {
    fail(ErrorKind::integrity,
         strf("checkpoint corrupt: %s while reading %s", what, context.c_str()));
  }
  void bytes(void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) corrupt("unexpected end of file");
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str(std::uint64_t max_len) {
    const std::uint64_t n = u64();
    if (n > max_len) corrupt("implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void save_checkpoint(const ParameterStore& store,
                     const std::map<std::string, std::string>& config,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, strf("cannot write '%s'", path.string().c_str()));
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_u64(out, config.size());
  for (const auto& [k, v] : config) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u64(out, store.names().size());
  for (const auto& name : store.names()) {
    const auto& t = store.get(name)->value;
    put_str(out, name);
    out.put(static_cast<char>(0));  // dtype 0 = 64-bit float
    put_u64(out, t.rank());
    for (auto d : t.shape()) put_u64(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  out.write(kFooter, sizeof kFooter);
  if (!out) fail(ErrorKind::io, strf("write to '%s' failed", path.string().c_str()));
}

ParameterStore load_checkpoint(const std::filesystem::path& path,
                               std::map<std::string, std::string>& config_out) {
  Reader r;
  r.in.open(path, std::ios::binary);
  if (!r.in) fail(ErrorKind::io, strf("cannot open '%s'", path.string().c_str()));

  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.corrupt("bad magic string");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    fail(ErrorKind::integrity, strf("checkpoint format version %u unsupported", version));

  r.context = "config block";
  config_out.clear();
  const std::uint64_t nconfig = r.u64();
  if (nconfig > 100000) r.corrupt("implausible config entry count");
  for (std::uint64_t i = 0; i < nconfig; ++i) {
    std::string k = r.str(1 << 16);
    std::string v = r.str(1 << 20);
    config_out.emplace(std::move(k), std::move(v));
  }

  ParameterStore store;
  const std::uint64_t nparams = r.u64();
  if (nparams > 1000000) r.corrupt("implausible parameter count");
  for (std::uint64_t i = 0; i < nparams; ++i) {
    r.context = strf("parameter record %llu", static_cast<unsigned long long>(i));
    const std::string name = r.str(1 << 16);
    r.context = strf("parameter record '%s'", name.c_str());
    char dtype;
    r.bytes(&dtype, 1);
    if (dtype != 0) r.corrupt("unknown dtype");
    const std::uint64_t rank = r.u64();
    if (rank > 8) r.corrupt("implausible rank");
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.u64());
      if (d == 0 || d > (1u << 28)) r.corrupt("implausible dimension");
      total *= d;
    }
    Tensor t(shape);
    r.bytes(t.data().data(), total * sizeof(double));
    if (store.has(name)) r.corrupt("duplicate parameter name");
    store.insert_raw(name, std::move(t));
  }
  r.context = "footer";
  char footer[8];
  r.bytes(footer, sizeof footer);
  if (std::memcmp(footer, kFooter, sizeof kFooter) != 0) r.corrupt("bad footer");
  return store;
}

}  // namespace tkgr
