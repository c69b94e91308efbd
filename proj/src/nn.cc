#include "afr/nn.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>

#include <zlib.h>

#include "afr/errors.h"

namespace afr {
namespace {

using Eigen::MatrixXd;

const std::vector<double>& InputVector(const StateObservation& obs, int i) {
  switch (i) {
    case 0:
      return obs.tau;
    case 1:
      return obs.p;
    case 2:
      return obs.q;
    case 3:
      return obs.m_vec;
    default:
      return obs.n_vec;
  }
}

constexpr const char* kInputNames[kVectorInputs] = {"tau", "p", "q", "m_vec",
                                                    "n_vec"};

// Block indices inside LayoutFor().
std::size_t ConvWeight(int input) { return 2 * static_cast<std::size_t>(input); }
std::size_t ConvBias(int input) { return ConvWeight(input) + 1; }
constexpr std::size_t kScalarWeight = 2 * kVectorInputs;
constexpr std::size_t kScalarBias = kScalarWeight + 1;
std::size_t HiddenWeight(int layer) { return kScalarBias + 1 + 2 * layer; }
std::size_t HiddenBias(int layer) { return HiddenWeight(layer) + 1; }
std::size_t HeadWeight(const NetworkSpec& s) { return HiddenWeight(s.hidden_layers); }
std::size_t HeadBias(const NetworkSpec& s) { return HeadWeight(s) + 1; }

void Relu(MatrixXd& m) { m = m.cwiseMax(0.0); }

// Zeroes gradient entries whose forward activation was clipped by ReLU.
void MaskByActivation(MatrixXd& grad, const MatrixXd& activation) {
  grad = (activation.array() > 0.0).select(grad, 0.0);
}

void CheckGradientShape(const NetworkParams& params,
                        const GradientBlocks& grads) {
  if (!(grads.spec == params.spec()) ||
      grads.values.size() != params.parameter_count())
    throw ShapeMismatch("gradient blocks do not match parameter layout");
}

}  // namespace

int NetworkSpec::conv_kernel(int input) const {
  return std::min(kernel, input_lengths[input]);
}

int NetworkSpec::conv_positions(int input) const {
  return input_lengths[input] - conv_kernel(input) + 1;
}

int NetworkSpec::concat_size() const {
  int total = scalar_units;
  for (int i = 0; i < kVectorInputs; ++i) total += filters * conv_positions(i);
  return total;
}

void ValidateSpec(const NetworkSpec& s) {
  if (s.head == HeadKind::kActor && s.m_actions < 2)
    throw InvalidTopology("actor needs at least 2 actions");
  if (s.head != HeadKind::kActor && s.head != HeadKind::kCritic)
    throw InvalidTopology("unknown head kind");
  if (s.hidden_layers < 1) throw InvalidTopology("need at least 1 hidden layer");
  if (s.hidden_units < 1 || s.filters < 1 || s.kernel < 1 || s.scalar_units < 1)
    throw InvalidTopology("layer widths and kernel must be positive");
  if (s.input_lengths.size() != static_cast<std::size_t>(kVectorInputs))
    throw InvalidTopology("expected 5 vector input lengths");
  for (int len : s.input_lengths)
    if (len < 1) throw InvalidTopology("input lengths must be positive");
}

std::vector<ParamBlock> LayoutFor(const NetworkSpec& s) {
  ValidateSpec(s);
  std::vector<ParamBlock> blocks;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    blocks.push_back({std::move(name), offset, rows, cols});
    offset += static_cast<std::size_t>(rows) * cols;
  };
  for (int i = 0; i < kVectorInputs; ++i) {
    add(std::string("conv_") + kInputNames[i] + ".weight", s.filters,
        s.conv_kernel(i));
    add(std::string("conv_") + kInputNames[i] + ".bias", s.filters, 1);
  }
  add("scalar.weight", s.scalar_units, kScalarInputs);
  add("scalar.bias", s.scalar_units, 1);
  int fan_in = s.concat_size();
  for (int l = 0; l < s.hidden_layers; ++l) {
    add("hidden" + std::to_string(l) + ".weight", s.hidden_units, fan_in);
    add("hidden" + std::to_string(l) + ".bias", s.hidden_units, 1);
    fan_in = s.hidden_units;
  }
  add("head.weight", s.output_size(), s.hidden_units);
  add("head.bias", s.output_size(), 1);
  return blocks;
}

NetworkParams::NetworkParams(NetworkSpec spec)
    : spec_(std::move(spec)), blocks_(LayoutFor(spec_)) {
  values_.assign(blocks_.back().offset + blocks_.back().size(), 0.0);
}

std::span<double> NetworkParams::block(std::size_t i) {
  const ParamBlock& b = blocks_.at(i);
  return std::span<double>(values_).subspan(b.offset, b.size());
}

std::span<const double> NetworkParams::block(std::size_t i) const {
  const ParamBlock& b = blocks_.at(i);
  return std::span<const double>(values_).subspan(b.offset, b.size());
}

Eigen::Map<const MatrixXd> NetworkParams::matrix(std::size_t i) const {
  const ParamBlock& b = blocks_[i];
  return {values_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<MatrixXd> NetworkParams::matrix(std::size_t i) {
  const ParamBlock& b = blocks_[i];
  return {values_.data() + b.offset, b.rows, b.cols};
}

GradientBlocks GradientBlocks::ZerosLike(const NetworkParams& params) {
  return {params.spec(), AlignedDoubles(params.parameter_count(), 0.0)};
}

GradientBlocks& GradientBlocks::operator+=(const GradientBlocks& other) {
  if (!(spec == other.spec) || values.size() != other.values.size())
    throw ShapeMismatch("cannot add gradients of different layouts");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  return *this;
}

double GradientBlocks::Norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

NetworkParams BuildNetwork(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkParams params(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params.blocks().size(); ++i) {
    const ParamBlock& b = params.blocks()[i];
    if (b.cols == 1 && b.name.ends_with(".bias")) continue;
    const double limit = std::sqrt(6.0 / b.cols);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : params.block(i)) w = dist(rng);
  }
  return params;
}

NetworkParams BuildNetwork(HeadKind kind, int m_actions, int hidden_layers,
                           int hidden_units, std::uint64_t seed) {
  NetworkSpec spec;
  spec.head = kind;
  spec.m_actions = m_actions;
  spec.hidden_layers = hidden_layers;
  spec.hidden_units = hidden_units;
  spec.input_lengths.back() = std::max(m_actions, 1);
  return BuildNetwork(spec, seed);
}

ForwardTrace Forward(const NetworkParams& params,
                     std::span<const StateObservation* const> batch) {
  const NetworkSpec& s = params.spec();
  const int n = static_cast<int>(batch.size());
  if (n == 0) throw ShapeMismatch("empty forward batch");
  for (const StateObservation* obs : batch)
    for (int i = 0; i < kVectorInputs; ++i)
      if (InputVector(*obs, i).size() !=
          static_cast<std::size_t>(s.input_lengths[i]))
        throw ShapeMismatch(std::string("input '") + kInputNames[i] +
                            "' has length " +
                            std::to_string(InputVector(*obs, i).size()) +
                            ", network expects " +
                            std::to_string(s.input_lengths[i]));

  ForwardTrace t;
  t.batch = n;
  t.concat.resize(s.concat_size(), n);
  int row = 0;
  for (int i = 0; i < kVectorInputs; ++i) {
    const int k = s.conv_kernel(i);
    const int positions = s.conv_positions(i);
    MatrixXd patches(k, positions * n);
    for (int j = 0; j < n; ++j) {
      const std::vector<double>& x = InputVector(*batch[j], i);
      for (int pos = 0; pos < positions; ++pos)
        for (int r = 0; r < k; ++r) patches(r, j * positions + pos) = x[pos + r];
    }
    MatrixXd out = params.matrix(ConvWeight(i)) * patches;
    out.colwise() += params.matrix(ConvBias(i)).col(0);
    Relu(out);
    const int width = s.filters * positions;
    for (int j = 0; j < n; ++j)
      t.concat.col(j).segment(row, width) = Eigen::Map<const Eigen::VectorXd>(
          out.data() + static_cast<std::ptrdiff_t>(j) * width, width);
    row += width;
    t.patches.push_back(std::move(patches));
    t.conv_out.push_back(std::move(out));
  }

  t.scalar_in.resize(kScalarInputs, n);
  for (int j = 0; j < n; ++j) {
    t.scalar_in(0, j) = batch[j]->phi;
    t.scalar_in(1, j) = batch[j]->delta;
  }
  t.scalar_out = params.matrix(kScalarWeight) * t.scalar_in;
  t.scalar_out.colwise() += params.matrix(kScalarBias).col(0);
  Relu(t.scalar_out);
  t.concat.bottomRows(s.scalar_units) = t.scalar_out;

  const MatrixXd* input = &t.concat;
  for (int l = 0; l < s.hidden_layers; ++l) {
    MatrixXd h = params.matrix(HiddenWeight(l)) * *input;
    h.colwise() += params.matrix(HiddenBias(l)).col(0);
    Relu(h);
    t.hidden.push_back(std::move(h));
    input = &t.hidden.back();
  }
  t.output = params.matrix(HeadWeight(s)) * t.hidden.back();
  t.output.colwise() += params.matrix(HeadBias(s)).col(0);

  if (s.head == HeadKind::kActor) {
    t.log_probs.resize(t.output.rows(), n);
    for (int j = 0; j < n; ++j) {
      const auto z = t.output.col(j);
      const double top = z.maxCoeff();
      const double log_sum = std::log((z.array() - top).exp().sum());
      t.log_probs.col(j) = z.array() - top - log_sum;
    }
    t.probs = t.log_probs.array().exp();
    // Renormalize so the column sums are 1 to within rounding.
    for (int j = 0; j < n; ++j) t.probs.col(j) /= t.probs.col(j).sum();
  }
  return t;
}

ActorOutput ForwardActor(const NetworkParams& params,
                         const StateObservation& obs) {
  if (params.spec().head != HeadKind::kActor)
    throw ShapeMismatch("ForwardActor needs an actor network");
  const StateObservation* batch[] = {&obs};
  ActorOutput out;
  out.trace = Forward(params, batch);
  out.probs.assign(out.trace.probs.data(),
                   out.trace.probs.data() + out.trace.probs.size());
  return out;
}

CriticOutput ForwardCritic(const NetworkParams& params,
                           const StateObservation& obs) {
  if (params.spec().head != HeadKind::kCritic)
    throw ShapeMismatch("ForwardCritic needs a critic network");
  const StateObservation* batch[] = {&obs};
  CriticOutput out;
  out.trace = Forward(params, batch);
  out.value = out.trace.output(0, 0);
  return out;
}

GradientBlocks BackwardFromOutput(const NetworkParams& params,
                                  const ForwardTrace& t,
                                  const MatrixXd& d_output) {
  GradientBlocks g;
  BackwardFromOutputInto(params, t, d_output, g);
  return g;
}

void BackwardFromOutputInto(const NetworkParams& params, const ForwardTrace& t,
                            const MatrixXd& d_output, GradientBlocks& g) {
  const NetworkSpec& s = params.spec();
  if (d_output.rows() != s.output_size() || d_output.cols() != t.batch ||
      static_cast<int>(t.hidden.size()) != s.hidden_layers ||
      t.concat.rows() != s.concat_size())
    throw ShapeMismatch("forward trace does not match the network");

  // Every block is overwritten below, so stale values need no clearing.
  if (!(g.spec == s) || g.values.size() != params.parameter_count()) {
    g.spec = s;
    g.values.assign(params.parameter_count(), 0.0);
  }
  auto grad = [&](std::size_t block) {
    const ParamBlock& b = params.blocks()[block];
    return Eigen::Map<MatrixXd>(g.values.data() + b.offset, b.rows, b.cols);
  };

  grad(HeadWeight(s)).noalias() = d_output * t.hidden.back().transpose();
  grad(HeadBias(s)) = d_output.rowwise().sum();
  MatrixXd upstream = params.matrix(HeadWeight(s)).transpose() * d_output;

  for (int l = s.hidden_layers - 1; l >= 0; --l) {
    MaskByActivation(upstream, t.hidden[l]);
    const MatrixXd& input = l == 0 ? t.concat : t.hidden[l - 1];
    grad(HiddenWeight(l)).noalias() = upstream * input.transpose();
    grad(HiddenBias(l)) = upstream.rowwise().sum();
    upstream = params.matrix(HiddenWeight(l)).transpose() * upstream;
  }
  // `upstream` is now d/d concat.

  MatrixXd d_scalar = upstream.bottomRows(s.scalar_units);
  MaskByActivation(d_scalar, t.scalar_out);
  grad(kScalarWeight).noalias() = d_scalar * t.scalar_in.transpose();
  grad(kScalarBias) = d_scalar.rowwise().sum();

  int row = 0;
  for (int i = 0; i < kVectorInputs; ++i) {
    const int positions = s.conv_positions(i);
    const int width = s.filters * positions;
    MatrixXd d_conv(s.filters, positions * t.batch);
    for (int j = 0; j < t.batch; ++j)
      Eigen::Map<Eigen::VectorXd>(
          d_conv.data() + static_cast<std::ptrdiff_t>(j) * width, width) =
          upstream.col(j).segment(row, width);
    MaskByActivation(d_conv, t.conv_out[i]);
    grad(ConvWeight(i)).noalias() = d_conv * t.patches[i].transpose();
    grad(ConvBias(i)) = d_conv.rowwise().sum();
    row += width;
  }
}

MatrixXd ActorLogitGradient(const NetworkParams& params,
                            const ForwardTrace& trace,
                            std::span<const int> actions,
                            std::span<const double> advantages, double beta) {
  const NetworkSpec& s = params.spec();
  if (s.head != HeadKind::kActor || trace.probs.cols() != trace.batch ||
      actions.size() != static_cast<std::size_t>(trace.batch) ||
      advantages.size() != actions.size())
    throw ShapeMismatch("actor backward: batch and trace do not line up");
  MatrixXd d_logits(s.m_actions, trace.batch);
  for (int j = 0; j < trace.batch; ++j) {
    const int a = actions[j];
    if (a < 1 || a > s.m_actions)
      throw ShapeMismatch("action " + std::to_string(a) + " outside [1, " +
                          std::to_string(s.m_actions) + "]");
    const auto p = trace.probs.col(j);
    const auto log_p = trace.log_probs.col(j);
    const double h = -(p.array() * log_p.array()).sum();
    // d log pi(a) / dz = onehot(a) - p ; dH/dz = -p (log p + H)
    d_logits.col(j) = -advantages[j] * p;
    d_logits(a - 1, j) += advantages[j];
    d_logits.col(j).array() -= beta * p.array() * (log_p.array() + h);
  }
  return d_logits;
}

GradientBlocks BackwardActor(const NetworkParams& params,
                             const ForwardTrace& trace,
                             std::span<const int> actions,
                             std::span<const double> advantages, double beta) {
  return BackwardFromOutput(
      params, trace,
      ActorLogitGradient(params, trace, actions, advantages, beta));
}

GradientBlocks BackwardActor(const NetworkParams& params,
                             const ForwardTrace& trace, int action,
                             double advantage, double beta) {
  const int actions[] = {action};
  const double advantages[] = {advantage};
  return BackwardActor(params, trace, actions, advantages, beta);
}

MatrixXd CriticValueGradient(const NetworkParams& params,
                             const ForwardTrace& trace,
                             std::span<const double> td_targets) {
  if (params.spec().head != HeadKind::kCritic ||
      td_targets.size() != static_cast<std::size_t>(trace.batch) ||
      trace.output.cols() != trace.batch)
    throw ShapeMismatch("critic backward: batch and trace do not line up");
  MatrixXd d_value(1, trace.batch);
  for (int j = 0; j < trace.batch; ++j)
    d_value(0, j) = -2.0 * (td_targets[j] - trace.output(0, j));
  return d_value;
}

GradientBlocks BackwardCritic(const NetworkParams& params,
                              const ForwardTrace& trace,
                              std::span<const double> td_targets) {
  return BackwardFromOutput(params, trace,
                            CriticValueGradient(params, trace, td_targets));
}

GradientBlocks BackwardCritic(const NetworkParams& params,
                              const ForwardTrace& trace, double td_target) {
  const double targets[] = {td_target};
  return BackwardCritic(params, trace, targets);
}

void ApplyGradients(NetworkParams& params, const GradientBlocks& grads,
                    double rate, StepDirection direction) {
  ApplyGradientsInto(params, grads, rate, direction, params);
}

void ApplyGradientsInto(const NetworkParams& base, const GradientBlocks& grads,
                        double rate, StepDirection direction,
                        NetworkParams& out) {
  CheckGradientShape(base, grads);
  if (!(out.spec() == base.spec()))
    throw ShapeMismatch("output parameters have a different layout");
  const auto n = static_cast<Eigen::Index>(grads.values.size());
  Eigen::Map<const Eigen::VectorXd> g(grads.values.data(), n);
  if (!g.allFinite())
    throw NonFiniteGradient("gradient contains NaN or infinity");
  const double step = direction == StepDirection::kAscent ? rate : -rate;
  Eigen::Map<const Eigen::VectorXd> src(base.values().data(), n);
  Eigen::Map<Eigen::VectorXd> dst(out.values().data(), n);
  dst = src + step * g;
}

double Entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double top = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

namespace {

class ByteWriter {
 public:
  void Bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename T>
  void Uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void I32(int v) { Uint(static_cast<std::uint32_t>(v)); }
  void F64(double v) { Uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <typename T>
  T Uint() {
    Need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  int I32() { return static_cast<int>(Uint<std::uint32_t>()); }
  double F64() { return std::bit_cast<double>(Uint<std::uint64_t>()); }
  std::string String(std::size_t n) {
    Need(n);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptFile("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t Crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void WriteNetwork(ByteWriter& w, const NetworkParams& params) {
  const NetworkSpec& s = params.spec();
  w.Uint(static_cast<std::uint8_t>(s.head));
  w.I32(s.m_actions);
  w.I32(s.hidden_layers);
  w.I32(s.hidden_units);
  w.I32(s.filters);
  w.I32(s.kernel);
  w.I32(s.scalar_units);
  w.Uint(static_cast<std::uint32_t>(s.input_lengths.size()));
  for (int len : s.input_lengths) w.I32(len);
  w.Uint(static_cast<std::uint64_t>(params.parameter_count()));
  for (double v : params.values()) w.F64(v);
}

NetworkParams ReadNetwork(ByteReader& r) {
  NetworkSpec s;
  s.head = static_cast<HeadKind>(r.Uint<std::uint8_t>());
  s.m_actions = r.I32();
  s.hidden_layers = r.I32();
  s.hidden_units = r.I32();
  s.filters = r.I32();
  s.kernel = r.I32();
  s.scalar_units = r.I32();
  const auto inputs = r.Uint<std::uint32_t>();
  if (inputs != kVectorInputs) throw CorruptFile("bad topology descriptor");
  s.input_lengths.assign(inputs, 0);
  for (int& len : s.input_lengths) len = r.I32();
  std::optional<NetworkParams> params;
  try {
    params.emplace(s);
  } catch (const InvalidTopology& e) {
    throw CorruptFile(std::string("bad topology descriptor: ") + e.what());
  }
  const auto count = r.Uint<std::uint64_t>();
  if (count != params->parameter_count() || r.remaining() / 8 < count)
    throw CorruptFile("parameter count does not match topology");
  for (double& v : params->values()) v = r.F64();
  return std::move(*params);
}

}  // namespace

std::vector<std::uint8_t> SerializeCheckpoint(const CheckpointBundle& bundle) {
  ByteWriter w;
  w.Bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.Uint(kCheckpointVersion);
  w.Uint(static_cast<std::uint32_t>(bundle.profile_name.size()));
  w.Bytes(bundle.profile_name.data(), bundle.profile_name.size());
  w.F64(bundle.norm.max_chunk_size);
  WriteNetwork(w, bundle.actor);
  WriteNetwork(w, bundle.critic);
  const std::uint32_t crc = Crc32(w.buffer());
  w.Uint(crc);
  return std::move(w.buffer());
}

CheckpointBundle DeserializeCheckpoint(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = sizeof(kCheckpointMagic) + 2;
  if (bytes.size() < kHeader + 4) throw CorruptFile("checkpoint truncated");
  if (!std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic),
                  bytes.begin(), [](char c, std::uint8_t b) {
                    return static_cast<std::uint8_t>(c) == b;
                  }))
    throw CorruptFile("bad checkpoint magic");
  const std::uint16_t version =
      static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));

  const auto body = bytes.first(bytes.size() - 4);
  ByteReader crc_reader(bytes.last(4));
  if (crc_reader.Uint<std::uint32_t>() != Crc32(body))
    throw CorruptFile("checkpoint checksum mismatch");

  ByteReader r(body.subspan(kHeader));
  const auto name_len = r.Uint<std::uint32_t>();
  std::string profile_name = r.String(name_len);
  NormalizationStats norm{r.F64()};
  NetworkParams actor = ReadNetwork(r);
  NetworkParams critic = ReadNetwork(r);
  if (r.remaining() != 0) throw CorruptFile("trailing bytes in checkpoint");
  if (actor.spec().head != HeadKind::kActor ||
      critic.spec().head != HeadKind::kCritic)
    throw CorruptFile("checkpoint networks have the wrong heads");
  return {std::move(actor), std::move(critic), norm, std::move(profile_name)};
}

void SaveCheckpoint(const CheckpointBundle& bundle,
                    const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = SerializeCheckpoint(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

CheckpointBundle LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointMissing("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return DeserializeCheckpoint(bytes);
}

}  // namespace afr
