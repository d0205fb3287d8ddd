#pragma once

#include "vdo/config.hpp"
#include "vdo/rng.hpp"

namespace vdo::channel {

// Large-scale path loss times small-scale power gain |f|^2. `distance` is
// expected to be floored at the reference distance already.
double v2v_gain(double fading, double distance, const ChannelParams& params);
double v2i_gain(double fading, double distance, const ChannelParams& params);

// Shannon rate in bits/s over an orthogonal, interference-free link.
double v2v_rate(double power, double gain, const ChannelParams& params);
double v2i_rate(double power, double gain, const ChannelParams& params);

// Power fading |f|^2 for one link and slot: exactly 1 in unit mode, Exp(1)
// in Rayleigh mode, optionally multiplied by log-normal shadowing
// 10^(sigma_db * Z / 10).
double sample_fading(Rng& rng, const ChannelParams& params);

}  // namespace vdo::channel
