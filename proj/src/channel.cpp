#include "vdo/channel.hpp"

#include <cmath>

namespace vdo::channel {
namespace {

double gain(double fading, double distance, double pathloss_const, double exponent, double d0) {
  return fading * pathloss_const * std::pow(d0 / distance, exponent);
}

double shannon(double bandwidth, double power, double gain, double noise_density) {
  return bandwidth * std::log2(1.0 + power * gain / (noise_density * bandwidth));
}

}  // namespace

double v2v_gain(double fading, double distance, const ChannelParams& p) {
  return gain(fading, distance, p.pathloss_const_v2v, p.pathloss_exp_v2v, p.ref_distance);
}

double v2i_gain(double fading, double distance, const ChannelParams& p) {
  return gain(fading, distance, p.pathloss_const_v2i, p.pathloss_exp_v2i, p.ref_distance);
}

double v2v_rate(double power, double gain, const ChannelParams& p) {
  return shannon(p.bandwidth_v2v, power, gain, p.noise_density);
}

double v2i_rate(double power, double gain, const ChannelParams& p) {
  return shannon(p.bandwidth_v2i, power, gain, p.noise_density);
}

double sample_fading(Rng& rng, const ChannelParams& p) {
  double value = p.fading_mode == FadingMode::kRayleigh ? exponential1(rng) : 1.0;
  if (p.shadowing_sigma_db > 0.0) {
    value *= std::pow(10.0, p.shadowing_sigma_db * standard_normal(rng) / 10.0);
  }
  return value;
}

}  // namespace vdo::channel
