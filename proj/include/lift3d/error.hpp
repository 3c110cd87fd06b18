#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lift3d {

// Every failure carries a stable kebab-case class id next to the human
// message so callers (and the CLI, which prints `error[<id>]: <msg>`) can
// branch on the class without parsing prose.
class Error : public std::runtime_error {
 public:
  Error(std::string class_id, std::string message)
      : std::runtime_error(class_id + ": " + message),
        class_id_(std::move(class_id)),
        message_(std::move(message)) {}

  const std::string& class_id() const noexcept { return class_id_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string class_id_;
  std::string message_;
};

namespace errc {
inline constexpr const char* invalid_joint_set = "invalid-joint-set";
inline constexpr const char* coordinate_frame = "coordinate-frame";
inline constexpr const char* behind_camera = "behind-camera";
inline constexpr const char* insufficient_views = "insufficient-views";
inline constexpr const char* degenerate_geometry = "degenerate-geometry";
inline constexpr const char* sequence_too_short = "sequence-too-short";
inline constexpr const char* numeric_failure = "numeric-failure";
inline constexpr const char* state_error = "state-error";
inline constexpr const char* shape_error = "shape-error";
inline constexpr const char* format_error = "format-error";
inline constexpr const char* empty_loss = "empty-loss";
inline constexpr const char* alignment_undefined = "alignment-undefined";
inline constexpr const char* io_error = "io-error";
inline constexpr const char* config_error = "config-error";
inline constexpr const char* camera_mismatch = "camera-mismatch";
}  // namespace errc

[[noreturn]] inline void fail(const char* class_id, const std::string& msg) {
  throw Error(class_id, msg);
}

inline void require(bool cond, const char* class_id, const std::string& msg) {
  if (!cond) fail(class_id, msg);
}

}  // namespace lift3d
