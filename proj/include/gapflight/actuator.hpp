#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "gapflight/dynamics.hpp"

namespace gapflight {

/// Delay per channel (thrust, wx, wy, wz) in control steps, and the
/// moving-average window length.
struct ResponseParams {
  std::array<int, 4> delay{3, 2, 2, 2};
  int window = 2;

  int max_delay() const { return *std::max_element(delay.begin(), delay.end()); }
  // Entries needed to evaluate the response.
  std::size_t required_history() const {
    return static_cast<std::size_t>(max_delay() + window);
  }
};

/// Fixed-capacity ring of past command setpoints. `at(0)` is the most
/// recently pushed command a_k, `at(i)` is a_{k-i}.
class CommandHistory {
 public:
  explicit CommandHistory(std::size_t capacity = 16)
      : buffer_(std::max<std::size_t>(capacity, 1)) {}

  std::size_t capacity() const { return buffer_.size(); }
  std::size_t size() const { return size_; }

  void fill(const CommandSetpoint& cmd) {
    std::fill(buffer_.begin(), buffer_.end(), cmd);
    head_ = 0;
    size_ = buffer_.size();
  }

  void clear() {
    head_ = 0;
    size_ = 0;
  }

  void push(const CommandSetpoint& cmd) {
    head_ = (head_ + 1) % buffer_.size();
    buffer_[head_] = cmd;
    size_ = std::min(size_ + 1, buffer_.size());
  }

  const CommandSetpoint& at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("CommandHistory::at");
    return buffer_[(head_ + buffer_.size() - i) % buffer_.size()];
  }

 private:
  std::vector<CommandSetpoint> buffer_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Delayed moving average of the command history, scaled per channel:
///   out[n] = c[n] / w * sum_{i=h[n]}^{h[n]+w-1} a_{k-i}[n]
inline ActuatorOutput actuator_response(const CommandHistory& history,
                                        const ResponseParams& params,
                                        const std::array<double, 4>& factors = {1.0, 1.0, 1.0, 1.0}) {
  if (params.window < 1)
    throw std::invalid_argument("actuator_response: window must be >= 1");
  for (int h : params.delay)
    if (h < 1) throw std::invalid_argument("actuator_response: delay must be >= 1");
  if (history.size() < params.required_history())
    throw std::logic_error(
        "actuator_response: command history shorter than delay + window "
        "(episode not initialized?)");

  std::array<double, 4> out{};
  const double inv_w = 1.0 / params.window;
  for (std::size_t n = 0; n < 4; ++n) {
    const auto h = static_cast<std::size_t>(params.delay[n]);
    double sum = 0.0;
    for (std::size_t i = h; i < h + static_cast<std::size_t>(params.window); ++i)
      sum += history.at(i).channels()[n];
    out[n] = factors[n] * inv_w * sum;
  }
  return ActuatorOutput::from_channels(out);
}

}  // namespace gapflight
