#pragma once

namespace motionmidi {

inline constexpr const char* kVersion = "0.1.0";

/// Format version of the checkpoint file layout. Bump on any change to the
/// manifest grammar or buffer ordering.
inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace motionmidi
