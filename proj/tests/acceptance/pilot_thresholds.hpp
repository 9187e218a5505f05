#pragma once

// Stage-1 probe gaps the desk preset must clear on every seed 1..5.
// Pilot (seeds 1..5) minimum: eye 0.995, lip 1.017. Locked ~0.1 below that.
// A gap can exceed 1: held-out cross-factor R^2 may be negative.
inline constexpr double kEyeGapThreshold = 0.90;
inline constexpr double kLipGapThreshold = 0.90;
