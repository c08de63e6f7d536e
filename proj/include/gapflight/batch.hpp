#pragma once

#include <cstring>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gapflight/environment.hpp"
#include "gapflight/io/json_io.hpp"

namespace gapflight {

inline constexpr const char* kProtocolVersion = "gapflight-batch/1";

/// Seed for the `episode`-th auto-reset of an env whose first episode used
/// `seed`. Episode 0 uses `seed` itself.
inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) {
  return episode == 0 ? seed : mix_seed(seed, episode);
}

struct BatchStep {
  StepResult step;
  std::optional<StepResult> reset;  // set when the episode ended and auto-reset ran

  const ObservationBundle& next_observation() const {
    return reset ? reset->observation : step.observation;
  }
};

/// K independent envs stepped together. Work is split over worker
/// threads; results are always returned in env-index order and do not
/// depend on the worker count.
class BatchEnv {
 public:
  BatchEnv(const EpisodeConfig& cfg, std::size_t num_envs, int workers = 1,
           std::shared_ptr<const SeedTrajectoryDataset> dataset = nullptr)
      : workers_(std::max(1, workers)) {
    if (num_envs == 0) throw std::invalid_argument("BatchEnv: need at least one env");
    envs_.reserve(num_envs);
    for (std::size_t i = 0; i < num_envs; ++i) envs_.emplace_back(cfg, dataset);
    seeds_.assign(num_envs, 0);
    episodes_.assign(num_envs, 0);
  }

  std::size_t size() const { return envs_.size(); }
  const Env& env(std::size_t i) const { return envs_.at(i); }
  const EpisodeConfig& config() const { return envs_.front().config(); }
  bool initialized() const { return initialized_; }

  std::vector<StepResult> reset(const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() != envs_.size())
      throw std::invalid_argument("BatchEnv::reset: expected " + std::to_string(envs_.size()) +
                                  " seeds, got " + std::to_string(seeds.size()));
    std::vector<StepResult> out(envs_.size());
    seeds_ = seeds;
    episodes_.assign(envs_.size(), 0);
    parallel_for([&](std::size_t i) { out[i] = envs_[i].reset(seeds_[i]); });
    initialized_ = true;
    return out;
  }

  std::vector<BatchStep> step(const std::vector<CommandSetpoint>& actions) {
    if (!initialized_) throw std::logic_error("BatchEnv::step called before reset");
    if (actions.size() != envs_.size())
      throw std::invalid_argument("BatchEnv::step: expected " + std::to_string(envs_.size()) +
                                  " actions, got " + std::to_string(actions.size()));
    std::vector<BatchStep> out(envs_.size());
    parallel_for([&](std::size_t i) {
      out[i].step = envs_[i].step(actions[i]);
      if (out[i].step.done)
        out[i].reset = envs_[i].reset(episode_seed(seeds_[i], ++episodes_[i]));
    });
    return out;
  }

 private:
  template <typename F>
  void parallel_for(F&& fn) {
    const std::size_t n = envs_.size();
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers_), n);
    if (w <= 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += w) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<Env> envs_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::uint64_t> episodes_;
  int workers_;
  bool initialized_ = false;
};

// ---------------------------------------------------------------------------
// Flat arrays for the binding.

inline std::size_t oracle_dim(int num_points) { return 3 * static_cast<std::size_t>(num_points) + 9; }

/// [points (n x 3, body frame), roll, pitch, body velocity (3), previous action (4)]
inline void append_oracle(std::vector<double>& out, const ObservationBundle& obs) {
  for (const Vec3& p : obs.gap_points) out.insert(out.end(), {p.x(), p.y(), p.z()});
  out.push_back(obs.roll);
  out.push_back(obs.pitch);
  out.insert(out.end(), {obs.body_velocity.x(), obs.body_velocity.y(), obs.body_velocity.z()});
  const auto a = obs.previous_action.channels();
  out.insert(out.end(), a.begin(), a.end());
}

namespace base64 {

inline std::string encode(const void* data, std::size_t size) {
  static constexpr char table[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  const auto* b = static_cast<const unsigned char*>(data);
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < size; i += 3) {
    const unsigned v = (b[i] << 16) | (b[i + 1] << 8) | b[i + 2];
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += table[v & 63];
  }
  if (i < size) {
    unsigned v = b[i] << 16;
    if (i + 1 < size) v |= b[i + 1] << 8;
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += i + 1 < size ? table[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<unsigned char> decode(const std::string& s) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (s.size() % 4 != 0) throw std::invalid_argument("base64: length is not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = s[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == s.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        v[k] = value(c);
        if (v[k] < 0 || pad > 0) throw std::invalid_argument("base64: invalid character");
      }
    }
    const unsigned n = (static_cast<unsigned>(v[0]) << 18) | (static_cast<unsigned>(v[1]) << 12) |
                       (static_cast<unsigned>(v[2]) << 6) | static_cast<unsigned>(v[3]);
    out.push_back(static_cast<unsigned char>(n >> 16));
    if (pad < 2) out.push_back(static_cast<unsigned char>((n >> 8) & 255));
    if (pad < 1) out.push_back(static_cast<unsigned char>(n & 255));
  }
  return out;
}

}  // namespace base64

template <typename T>
struct DtypeName;
template <> struct DtypeName<double> { static constexpr const char* value = "float64"; };
template <> struct DtypeName<float> { static constexpr const char* value = "float32"; };
template <> struct DtypeName<std::uint8_t> { static constexpr const char* value = "uint8"; };
template <> struct DtypeName<std::int8_t> { static constexpr const char* value = "int8"; };
template <> struct DtypeName<std::int32_t> { static constexpr const char* value = "int32"; };

/// Flat row-major array, little-endian bytes, base64 in JSON.
template <typename T>
Json encode_array(const std::vector<T>& data, const std::vector<std::size_t>& shape) {
  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  if (count != data.size()) throw std::logic_error("encode_array: shape does not match data size");
  Json sh = Json::array();
  for (std::size_t s : shape) sh.push_back(s);
  return {{"dtype", DtypeName<T>::value},
          {"shape", sh},
          {"encoding", "base64"},
          {"data", base64::encode(data.data(), data.size() * sizeof(T))}};
}

class BindingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
std::vector<T> decode_array(const Json& j, const std::vector<std::size_t>& expected_shape,
                            const std::string& name) {
  if (!j.is_object()) throw BindingError(name + ": expected an array object");
  if (j.value("dtype", "") != DtypeName<T>::value)
    throw BindingError(name + ": dtype must be " + DtypeName<T>::value);
  if (j.value("encoding", "") != "base64") throw BindingError(name + ": encoding must be base64");
  if (!j.contains("shape") || !j.at("shape").is_array()) throw BindingError(name + ": missing shape");
  std::vector<std::size_t> shape;
  for (const auto& s : j.at("shape")) {
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0)
      throw BindingError(name + ": shape entries must be non-negative integers");
    shape.push_back(s.get<std::size_t>());
  }
  if (shape != expected_shape) {
    std::string want;
    for (std::size_t s : expected_shape) want += (want.empty() ? "" : "x") + std::to_string(s);
    throw BindingError(name + ": expected shape " + want);
  }
  if (!j.contains("data") || !j.at("data").is_string()) throw BindingError(name + ": missing data");
  std::vector<unsigned char> bytes;
  try {
    bytes = base64::decode(j.at("data").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw BindingError(name + ": " + e.what());
  }
  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  if (bytes.size() != count * sizeof(T)) throw BindingError(name + ": data length does not match shape");
  std::vector<T> out(count);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

/// Request handlers of the batch contract: spec / reset / step. Each takes
/// and returns a JSON body; bodies carry the protocol version.
class BatchBinding {
 public:
  explicit BatchBinding(std::unique_ptr<BatchEnv> env) : env_(std::move(env)) {}

  BatchEnv& env() { return *env_; }

  Json spec() const {
    const auto& cfg = env_->config();
    const auto K = env_->size();
    Json obs = {{"kind", to_string(cfg.observation)},
                {"oracle", {{"dtype", "float64"}, {"shape", {K, oracle_dim(cfg.num_points)}}}},
                {"num_points", cfg.num_points}};
    if (cfg.observation == ObservationKind::Mask)
      obs["mask"] = {{"dtype", "uint8"},
                     {"shape", {K, static_cast<std::size_t>(cfg.camera.height),
                                static_cast<std::size_t>(cfg.camera.width)}}};
    const auto& b = cfg.action_bounds;
    return {{"protocol_version", kProtocolVersion},
            {"num_envs", K},
            {"observation", obs},
            {"action",
             {{"dtype", "float64"},
              {"shape", {K, 4}},
              {"low", {b.thrust_min, -b.bodyrate_max, -b.bodyrate_max, -b.bodyrate_max}},
              {"high", {b.thrust_max, b.bodyrate_max, b.bodyrate_max, b.bodyrate_max}}}},
            {"dt", cfg.dynamics.control_period},
            {"horizon", cfg.horizon},
            {"info_fields", {"clearance", "xg", "traversal_label", "outcome", "target_gap",
                             "gaps_passed", "reset_from_buffer"}}};
  }

  Json reset(const Json& req) {
    check_version(req);
    if (!req.contains("seeds") || !req.at("seeds").is_array())
      throw BindingError("reset: 'seeds' must be an array of unsigned integers");
    std::vector<std::uint64_t> seeds;
    for (const auto& s : req.at("seeds")) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
        throw BindingError("reset: seeds must be unsigned integers");
      seeds.push_back(s.get<std::uint64_t>());
    }
    if (seeds.size() != env_->size())
      throw BindingError("reset: expected " + std::to_string(env_->size()) + " seeds");
    const auto results = env_->reset(seeds);
    std::vector<const ObservationBundle*> obs;
    for (const auto& r : results) obs.push_back(&r.observation);
    Json out = observations(obs);
    out["protocol_version"] = kProtocolVersion;
    return out;
  }

  Json step(const Json& req) {
    check_version(req);
    if (!env_->initialized()) throw BindingError("step: call reset first");
    if (!req.contains("actions")) throw BindingError("step: missing 'actions'");
    const std::size_t K = env_->size();
    const auto flat = decode_array<double>(req.at("actions"), {K, 4}, "actions");
    std::vector<CommandSetpoint> actions(K);
    for (std::size_t i = 0; i < K; ++i)
      actions[i] = CommandSetpoint::from_channels({flat[4 * i], flat[4 * i + 1], flat[4 * i + 2], flat[4 * i + 3]});
    const auto results = env_->step(actions);

    std::vector<const ObservationBundle*> obs;
    std::vector<double> reward(K), xg(K);
    std::vector<std::uint8_t> done(K), from_buffer(K);
    std::vector<std::int8_t> clearance(K), label(K), outcome(K);
    std::vector<std::int32_t> target(K), passed(K);
    for (std::size_t i = 0; i < K; ++i) {
      const auto& s = results[i].step;
      obs.push_back(&results[i].next_observation());
      reward[i] = s.reward.total;
      done[i] = s.done ? 1 : 0;
      clearance[i] = static_cast<std::int8_t>(s.info.clearance);
      xg[i] = s.info.xg;
      label[i] = static_cast<std::int8_t>(s.info.traversal_label);
      outcome[i] = static_cast<std::int8_t>(s.info.outcome);
      target[i] = s.info.target_gap;
      passed[i] = s.info.gaps_passed;
      from_buffer[i] = s.info.reset_from_buffer ? 1 : 0;
    }
    Json out = observations(obs);
    out["protocol_version"] = kProtocolVersion;
    out["reward"] = encode_array(reward, {K});
    out["done"] = encode_array(done, {K});
    out["info"] = {{"clearance", encode_array(clearance, {K})},
                   {"xg", encode_array(xg, {K})},
                   {"traversal_label", encode_array(label, {K})},
                   {"outcome", encode_array(outcome, {K})},
                   {"target_gap", encode_array(target, {K})},
                   {"gaps_passed", encode_array(passed, {K})},
                   {"reset_from_buffer", encode_array(from_buffer, {K})}};
    return out;
  }

  static void check_version(const Json& req) {
    if (!req.is_object()) throw BindingError("request body must be a JSON object");
    const std::string v = req.value("protocol_version", "");
    if (v != kProtocolVersion)
      throw BindingError("protocol version mismatch: server speaks '" + std::string(kProtocolVersion) +
                         "', request has '" + v + "'");
  }

 private:
  Json observations(const std::vector<const ObservationBundle*>& obs) const {
    const auto& cfg = env_->config();
    const std::size_t K = obs.size();
    std::vector<double> oracle;
    oracle.reserve(K * oracle_dim(cfg.num_points));
    for (const auto* o : obs) append_oracle(oracle, *o);
    Json out;
    out["obs"] = encode_array(oracle, {K, oracle_dim(cfg.num_points)});
    if (cfg.observation == ObservationKind::Mask) {
      const auto H = static_cast<std::size_t>(cfg.camera.height);
      const auto W = static_cast<std::size_t>(cfg.camera.width);
      std::vector<std::uint8_t> masks;
      masks.reserve(K * H * W);
      for (const auto* o : obs) masks.insert(masks.end(), o->mask->pixels.begin(), o->mask->pixels.end());
      out["mask"] = encode_array(masks, {K, H, W});
    }
    return out;
  }

  std::unique_ptr<BatchEnv> env_;
};

}  // namespace gapflight
