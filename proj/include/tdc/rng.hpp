#ifndef TDC_RNG_HPP
#define TDC_RNG_HPP

#include <cstdint>
#include <random>

namespace tdc {

// SplitMix64 finalizer; used only to decorrelate (master seed, stream id) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t stream_id) {
  return splitmix64(master_seed ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL));
}

/// One independent random stream per trajectory. The stream depends only on
/// (master_seed, stream_id), never on scheduling.
class StreamRng {
public:
  StreamRng(std::uint64_t master_seed, std::uint64_t stream_id)
      : engine_(stream_seed(master_seed, stream_id)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace tdc

#endif // TDC_RNG_HPP
