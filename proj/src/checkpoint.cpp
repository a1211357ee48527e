#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "sbrl/errors.hpp"
#include "sbrl/orchestrator.hpp"

namespace sbrl {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void ints(const std::vector<int>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (int x : v) u32(static_cast<std::uint32_t>(x));
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t base_offset)
      : data_(data), base_(base_offset) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t len = u32();
    const char* p = take(len);
    return {p, len};
  }
  std::vector<int> ints() {
    const std::uint32_t count = u32();
    std::vector<int> v(count);
    for (auto& x : v) x = static_cast<int>(u32());
    return v;
  }
  std::vector<double> doubles() {
    const std::uint64_t count = u64();
    if (count > data_.size()) throw ParseError("implausible array length", offset());
    std::vector<double> v(count);
    for (auto& x : v) x = f64();
    return v;
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t offset() const { return base_ + pos_; }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > data_.size()) throw ParseError("unexpected end of data", offset());
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& data_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const ParamSet& params) {
  w.u32(static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& [name, t] : params.entries) {
    w.str(name);
    w.ints(t.shape());
    w.doubles(t.vec());
  }
}

ParamSet read_params(Reader& r) {
  ParamSet params;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    std::vector<int> shape = r.ints();
    std::vector<double> data = r.doubles();
    params.entries.emplace_back(name, Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

void write_adam(Writer& w, const AdamState& state) {
  w.f64(state.cfg.lr);
  w.f64(state.cfg.beta1);
  w.f64(state.cfg.beta2);
  w.f64(state.cfg.eps);
  w.u64(state.step);
  write_params(w, state.m);
  write_params(w, state.v);
}

AdamState read_adam(Reader& r) {
  AdamState state;
  state.cfg.lr = r.f64();
  state.cfg.beta1 = r.f64();
  state.cfg.beta2 = r.f64();
  state.cfg.eps = r.f64();
  state.step = r.u64();
  state.m = read_params(r);
  state.v = read_params(r);
  return state;
}

void write_config(Writer& w, const TrainConfig& c) {
  w.str(c.env_name);
  w.u32(static_cast<std::uint32_t>(c.horizon));
  w.f64(c.dt);
  w.ints(c.widths.policy);
  w.ints(c.widths.drift);
  w.ints(c.widths.diffusion);
  w.ints(c.widths.barrier);
  w.u32(static_cast<std::uint32_t>(c.outer_iters));
  w.u32(static_cast<std::uint32_t>(c.inner_gen_steps));
  w.u32(static_cast<std::uint32_t>(c.lie_samples));
  w.f64(c.lambda);
  w.f64(c.gamma);
  w.f64(c.lr_policy);
  w.f64(c.lr_model);
  w.f64(c.lr_barrier);
  w.u32(static_cast<std::uint32_t>(c.batch_real));
  w.u32(static_cast<std::uint32_t>(c.batch_synthetic));
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.cert_pairs));
  w.u32(static_cast<std::uint32_t>(c.cert_retrain_steps));
  w.u32(static_cast<std::uint32_t>(c.cert_init_samples));
  w.u32(static_cast<std::uint32_t>(c.cert_unsafe_samples));
}

TrainConfig read_config(Reader& r) {
  TrainConfig c;
  c.env_name = r.str();
  c.horizon = static_cast<int>(r.u32());
  c.dt = r.f64();
  c.widths.policy = r.ints();
  c.widths.drift = r.ints();
  c.widths.diffusion = r.ints();
  c.widths.barrier = r.ints();
  c.outer_iters = static_cast<int>(r.u32());
  c.inner_gen_steps = static_cast<int>(r.u32());
  c.lie_samples = static_cast<int>(r.u32());
  c.lambda = r.f64();
  c.gamma = r.f64();
  c.lr_policy = r.f64();
  c.lr_model = r.f64();
  c.lr_barrier = r.f64();
  c.batch_real = static_cast<int>(r.u32());
  c.batch_synthetic = static_cast<int>(r.u32());
  c.seed = r.u64();
  c.cert_pairs = static_cast<int>(r.u32());
  c.cert_retrain_steps = static_cast<int>(r.u32());
  c.cert_init_samples = static_cast<int>(r.u32());
  c.cert_unsafe_samples = static_cast<int>(r.u32());
  return c;
}

void write_rng(Writer& w, const RngBundle& rng) {
  for (const Rng* stream : {&rng.env, &rng.model, &rng.barrier, &rng.eval})
    for (std::uint64_t word : stream->state()) w.u64(word);
}

RngBundle read_rng(Reader& r) {
  RngBundle rng;
  for (Rng* stream : {&rng.env, &rng.model, &rng.barrier, &rng.eval}) {
    std::array<std::uint64_t, 4> s{};
    for (auto& word : s) word = r.u64();
    *stream = Rng::from_state(s);
  }
  return rng;
}

void write_replay(Writer& w, const std::vector<Trajectory>& replay) {
  w.u64(replay.size());
  for (const Trajectory& traj : replay) {
    const std::uint32_t len = static_cast<std::uint32_t>(traj.states.size());
    const std::uint32_t n = len ? static_cast<std::uint32_t>(traj.states.front().size()) : 0;
    const std::uint32_t m = len ? static_cast<std::uint32_t>(traj.actions.front().size()) : 0;
    w.u32(len);
    w.u32(n);
    w.u32(m);
    for (const Vec& s : traj.states)
      for (double v : s) w.f64(v);
    for (const Vec& a : traj.actions)
      for (double v : a) w.f64(v);
    for (double v : traj.rewards) w.f64(v);
    w.i64(traj.unsafe_hit ? *traj.unsafe_hit : -1);
  }
}

std::vector<Trajectory> read_replay(Reader& r) {
  const std::uint64_t count = r.u64();
  std::vector<Trajectory> replay;
  replay.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Trajectory traj;
    const std::uint32_t len = r.u32();
    const std::uint32_t n = r.u32();
    const std::uint32_t m = r.u32();
    traj.states.resize(len, Vec(n));
    traj.actions.resize(len, Vec(m));
    traj.rewards.resize(len);
    for (auto& s : traj.states)
      for (double& v : s) v = r.f64();
    for (auto& a : traj.actions)
      for (double& v : a) v = r.f64();
    for (double& v : traj.rewards) v = r.f64();
    const std::int64_t hit = r.i64();
    if (hit >= 0) traj.unsafe_hit = static_cast<int>(hit);
    replay.push_back(std::move(traj));
  }
  return replay;
}

constexpr char kMagic[4] = {'S', 'B', 'R', 'L'};

void append_section(std::string& out, const std::string& tag, const Writer& payload) {
  Writer header;
  header.u32(static_cast<std::uint32_t>(tag.size()));
  out += header.bytes();
  out += tag;
  Writer len;
  len.u64(payload.bytes().size());
  out += len.bytes();
  out += payload.bytes();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::string out(kMagic, sizeof kMagic);
  {
    Writer v;
    v.u32(checkpoint.version);
    out += v.bytes();
  }
  auto section = [&out](const std::string& tag, auto&& fill) {
    Writer w;
    fill(w);
    append_section(out, tag, w);
  };
  section("config", [&](Writer& w) { write_config(w, checkpoint.config); });
  section("policy", [&](Writer& w) { write_params(w, checkpoint.policy); });
  section("drift", [&](Writer& w) { write_params(w, checkpoint.drift); });
  section("diffusion", [&](Writer& w) { write_params(w, checkpoint.diffusion); });
  section("barrier", [&](Writer& w) { write_params(w, checkpoint.barrier); });
  section("adam.policy", [&](Writer& w) { write_adam(w, checkpoint.adam_policy); });
  section("adam.drift", [&](Writer& w) { write_adam(w, checkpoint.adam_drift); });
  section("adam.diffusion", [&](Writer& w) { write_adam(w, checkpoint.adam_diffusion); });
  section("adam.barrier", [&](Writer& w) { write_adam(w, checkpoint.adam_barrier); });
  section("progress", [&](Writer& w) { w.u64(checkpoint.iteration); });
  section("rng", [&](Writer& w) { write_rng(w, checkpoint.rng); });
  section("replay", [&](Writer& w) { write_replay(w, checkpoint.replay); });

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw ContractError("cannot open checkpoint path for writing: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw ContractError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open checkpoint: " + path.string());
  std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (data.size() < 8) throw ParseError("file too short for header", data.size());
  if (std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
    throw ParseError("bad magic bytes", 0);
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i)
    version |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[4 + static_cast<std::size_t>(i)])) << (8 * i);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);

  // Scan sections.
  std::map<std::string, std::pair<std::size_t, std::string>> sections;  // tag -> (offset, payload)
  std::size_t pos = 8;
  auto need = [&](std::size_t n) {
    if (pos + n > data.size()) throw ParseError("truncated section header", pos);
  };
  while (pos < data.size()) {
    need(4);
    std::uint32_t tag_len = 0;
    for (int i = 0; i < 4; ++i)
      tag_len |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += 4;
    need(tag_len);
    std::string tag = data.substr(pos, tag_len);
    pos += tag_len;
    need(8);
    std::uint64_t payload_len = 0;
    for (int i = 0; i < 8; ++i)
      payload_len |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += 8;
    if (pos + payload_len > data.size()) throw ParseError("truncated section '" + tag + "'", pos);
    sections[tag] = {pos, data.substr(pos, payload_len)};
    pos += payload_len;
  }

  auto reader = [&](const std::string& tag) {
    auto it = sections.find(tag);
    if (it == sections.end()) throw ParseError("missing section '" + tag + "'", data.size());
    return Reader(it->second.second, it->second.first);
  };

  Checkpoint ck;
  ck.version = version;
  {
    Reader r = reader("config");
    ck.config = read_config(r);
  }
  {
    Reader r = reader("policy");
    ck.policy = read_params(r);
  }
  {
    Reader r = reader("drift");
    ck.drift = read_params(r);
  }
  {
    Reader r = reader("diffusion");
    ck.diffusion = read_params(r);
  }
  {
    Reader r = reader("barrier");
    ck.barrier = read_params(r);
  }
  {
    Reader r = reader("adam.policy");
    ck.adam_policy = read_adam(r);
  }
  {
    Reader r = reader("adam.drift");
    ck.adam_drift = read_adam(r);
  }
  {
    Reader r = reader("adam.diffusion");
    ck.adam_diffusion = read_adam(r);
  }
  {
    Reader r = reader("adam.barrier");
    ck.adam_barrier = read_adam(r);
  }
  {
    Reader r = reader("progress");
    ck.iteration = r.u64();
  }
  {
    Reader r = reader("rng");
    ck.rng = read_rng(r);
  }
  {
    Reader r = reader("replay");
    ck.replay = read_replay(r);
  }
  return ck;
}

}  // namespace sbrl
