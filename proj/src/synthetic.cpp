#include "chunklab/synthetic.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace chunklab {

void SynthConfig::validate() const {
  if (T < 2) throw std::invalid_argument("synthetic T must be >= 2");
  if (d_z < 1 || d_x < 1) throw std::invalid_argument("synthetic dimensions must be >= 1");
  if (!(boundary_rate > 0.0 && boundary_rate <= 1.0))
    throw std::invalid_argument("boundary rate must be in (0, 1]");
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
}

GeneratorInstance GeneratorInstance::create(const SynthConfig& cfg, SeededRng& rng) {
  cfg.validate();
  GeneratorInstance g{DenseArray<double>({cfg.d_z, cfg.d_x})};
  for (auto& w : g.W.data) w = rng.normal();
  return g;
}

SynthSample sample(const SynthConfig& cfg, const GeneratorInstance& gen, SeededRng& rng) {
  cfg.validate();
  if (gen.W.shape != Shape{cfg.d_z, cfg.d_x})
    throw std::invalid_argument("generator map does not match config dimensions");
  const std::size_t T = cfg.T, dz = cfg.d_z, dx = cfg.d_x;
  std::vector<std::uint8_t> bits(T, 0);
  bits[0] = 1;
  for (std::size_t t = 1; t < T; ++t) bits[t] = rng.bernoulli(cfg.boundary_rate) ? 1 : 0;

  SynthSample s{DenseArray<float>({T, dz}), DenseArray<float>({T, dx}),
                BoundaryMask(std::move(bits))};
  std::vector<float> proto(dz);
  std::vector<double> obs(dx);
  for (std::size_t t = 0; t < T; ++t) {
    if (s.b_star[t]) {
      for (auto& v : proto) v = static_cast<float>(rng.normal());
      std::fill(obs.begin(), obs.end(), 0.0);
      for (std::size_t i = 0; i < dz; ++i)
        for (std::size_t j = 0; j < dx; ++j) obs[j] += double(proto[i]) * gen.W.data[i * dx + j];
    }
    std::copy(proto.begin(), proto.end(), s.z.data.begin() + t * dz);
    for (std::size_t j = 0; j < dx; ++j) {
      const double eps = cfg.noise > 0 ? cfg.noise * rng.normal() : 0.0;
      s.x.data[t * dx + j] = static_cast<float>(obs[j] + eps);
    }
  }
  return s;
}

template <class Real>
Var<Real> encode(Var<Real> x, const EncoderParams<Real>& params) {
  auto candidate = matmul(x, params.U);
  auto gate = sigmoid(add_row_bias(matmul(x, params.V), params.gate_bias));
  return matmul(ema_scan(candidate, gate), params.O);
}

template <class Real>
Var<Real> oracle_subsample(Var<Real> z, const BoundaryMask& b_hat) {
  return select_rows(stop_gradient(z), b_hat.bits());
}

BoundaryAccuracy boundary_accuracy(const BoundaryMask& b_hat, const BoundaryMask& b_star) {
  if (b_hat.size() != b_star.size())
    throw std::invalid_argument("boundary_accuracy: length mismatch");
  std::size_t agree = 0, tp = 0;
  for (std::size_t t = 0; t < b_hat.size(); ++t) {
    agree += b_hat[t] == b_star[t] ? 1 : 0;
    tp += (b_hat[t] && b_star[t]) ? 1 : 0;
  }
  BoundaryAccuracy a;
  a.accuracy = static_cast<double>(agree) / static_cast<double>(b_hat.size());
  a.precision = static_cast<double>(tp) / static_cast<double>(b_hat.count());
  a.recall = static_cast<double>(tp) / static_cast<double>(b_star.count());
  a.f1 = tp ? 2 * a.precision * a.recall / (a.precision + a.recall) : 0.0;
  return a;
}

// ---------------------------------------------------------------------------
// Binary dataset container

namespace {

constexpr char kMagic[4] = {'S', 'M', 'B', '1'};

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw std::runtime_error("dataset: unexpected end of file");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const SynthConfig& cfg,
                   const std::vector<SynthSample>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kMagic, 4);
  put_le<std::uint64_t>(os, cfg.T);
  put_le<std::uint64_t>(os, cfg.d_z);
  put_le<std::uint64_t>(os, cfg.d_x);
  put_le<double>(os, cfg.noise);
  put_le<double>(os, cfg.boundary_rate);
  put_le<std::uint64_t>(os, cfg.seed);
  put_le<std::uint64_t>(os, samples.size());
  for (const auto& s : samples) {
    if (s.z.shape != Shape{cfg.T, cfg.d_z} || s.x.shape != Shape{cfg.T, cfg.d_x})
      throw std::invalid_argument("dataset: sample shape does not match header");
    for (float v : s.z.data) put_le<float>(os, v);
    for (float v : s.x.data) put_le<float>(os, v);
    std::vector<char> packed((cfg.T + 7) / 8, 0);
    for (std::size_t t = 0; t < cfg.T; ++t)
      if (s.b_star[t]) packed[t / 8] = static_cast<char>(packed[t / 8] | (1 << (t % 8)));
    os.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path.string() + ": not an SMB1 dataset");
  Dataset d;
  d.cfg.T = get_le<std::uint64_t>(is);
  d.cfg.d_z = get_le<std::uint64_t>(is);
  d.cfg.d_x = get_le<std::uint64_t>(is);
  d.cfg.noise = get_le<double>(is);
  d.cfg.boundary_rate = get_le<double>(is);
  d.cfg.seed = get_le<std::uint64_t>(is);
  const auto n = get_le<std::uint64_t>(is);
  d.cfg.validate();
  for (std::uint64_t k = 0; k < n; ++k) {
    DenseArray<float> z({d.cfg.T, d.cfg.d_z}), x({d.cfg.T, d.cfg.d_x});
    for (auto& v : z.data) v = get_le<float>(is);
    for (auto& v : x.data) v = get_le<float>(is);
    std::vector<char> packed((d.cfg.T + 7) / 8);
    if (!is.read(packed.data(), static_cast<std::streamsize>(packed.size())))
      throw std::runtime_error("dataset: truncated boundary block");
    std::vector<std::uint8_t> bits(d.cfg.T);
    for (std::size_t t = 0; t < d.cfg.T; ++t) bits[t] = (packed[t / 8] >> (t % 8)) & 1;
    d.samples.push_back({std::move(z), std::move(x), BoundaryMask(std::move(bits))});
  }
  return d;
}

template Var<float> encode(Var<float>, const EncoderParams<float>&);
template Var<double> encode(Var<double>, const EncoderParams<double>&);
template Var<float> oracle_subsample(Var<float>, const BoundaryMask&);
template Var<double> oracle_subsample(Var<double>, const BoundaryMask&);

}  // namespace chunklab
