#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace motionduet {

/// Ordered record of the code-path stages a forward pass executed. Callers
/// pass one in when they need to compare program flow between two runs.
class PathTrace {
 public:
  void hit(std::string_view stage) { stages_.emplace_back(stage); }
  const std::vector<std::string>& stages() const noexcept { return stages_; }
  void clear() { stages_.clear(); }

 private:
  std::vector<std::string> stages_;
};

inline void traceHit(PathTrace* trace, std::string_view stage) {
  if (trace != nullptr) trace->hit(stage);
}

}  // namespace motionduet
