#pragma once

// Byte-accurate model of a generational managed heap shared by the tasks of
// one worker: young/old generations, minor and full collections with
// pause-time accounting, and the long-living estimate used as the pressure
// signal.

#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "murs/kvdata.hpp"

namespace murs::heap {

using OwnerId = std::uint64_t;

enum class AllocKind { Temporary, LongLiving };
enum class GcKind { Minor, Full };
enum class PressureLevel { Normal, Yellow, Red };
enum class AllocStatus { Ok, OutOfMemory };

std::string_view to_string(GcKind k);
std::string_view to_string(PressureLevel p);

struct HeapConfig {
  Bytes total_bytes = Bytes{128} << 20;
  double young_fraction = 0.33;
  double yellow = 0.4;
  double red = 0.8;
  double minor_pause_ns_per_surviving_byte = 1.0;
  double full_pause_ns_per_live_byte = 2.0;

  Bytes young_bytes() const { return static_cast<Bytes>(static_cast<double>(total_bytes) * young_fraction); }
  Bytes old_bytes() const { return total_bytes - young_bytes(); }

  friend bool operator==(const HeapConfig&, const HeapConfig&) = default;
};

/// Throws SpecError unless 0 < yellow < red < 1 and 0 < young_fraction < 1.
void validate(const HeapConfig& c);

struct Allocation {
  OwnerId owner = 0;
  AllocKind kind = AllocKind::Temporary;
  Bytes bytes = 0;
  bool cached = false;  // survives free_task_memory; released by free_cached
};

struct GcEvent {
  GcKind kind = GcKind::Minor;
  Bytes promoted_or_reclaimed_bytes = 0;  // promoted for Minor, reclaimed for Full
  Bytes reclaimed_bytes = 0;
  Bytes surviving_bytes = 0;
  std::int64_t pause_ns = 0;
  double heap_usage_after = 0.0;  // the long-living estimate after this event
};

PressureLevel pressure_level(double long_living_fraction, const HeapConfig& c);

struct HeapSnapshot {
  Bytes total_bytes = 0;
  Bytes young_used = 0;
  Bytes old_used = 0;
  Bytes live_long_living = 0;
  double long_living_fraction = 0.0;
  PressureLevel level = PressureLevel::Normal;
  /// Free memory as seen by the scheduler: capacity not claimed by the
  /// long-living estimate.
  Bytes free_bytes = 0;
};

class Heap {
 public:
  explicit Heap(HeapConfig config);

  /// Places `a` in the young generation (or directly in old when it exceeds
  /// the young capacity), collecting as needed. OutOfMemory when the live
  /// long-living bytes plus the request exceed the heap after a full GC.
  AllocStatus allocate(const Allocation& a);

  GcEvent minor_gc();
  GcEvent full_gc();

  /// Non-cached long-living bytes of `owner` become dead. Idempotent.
  void free_task_memory(OwnerId owner);
  /// Cached long-living bytes of `owner` become dead.
  void free_cached(OwnerId owner);
  /// Marks up to `bytes` of the owner's non-cached long-living data dead
  /// (older data first). Returns the amount released.
  Bytes release(OwnerId owner, Bytes bytes);

  const HeapConfig& config() const { return config_; }
  Bytes young_used() const { return temp_ + young_dead_ + young_live_; }
  Bytes old_used() const { return old_live_ + old_dead_; }
  Bytes used() const { return young_used() + old_used(); }
  Bytes live_long_living() const { return young_live_ + old_live_; }
  Bytes dead_bytes() const { return temp_ + young_dead_ + old_dead_; }
  /// All live long-living bytes of `owner`, cached included.
  Bytes owner_live(OwnerId owner) const;
  Bytes owner_cached(OwnerId owner) const;

  /// Updated only when a collection runs.
  double long_living_fraction() const;
  Bytes long_living_estimate_bytes() const { return estimate_bytes_; }
  PressureLevel pressure() const { return pressure_level(long_living_fraction(), config_); }
  HeapSnapshot snapshot() const;

  const std::vector<GcEvent>& gc_log() const { return gc_log_; }
  std::int64_t cumulative_gc_pause_ns() const { return cumulative_pause_ns_; }
  Bytes peak_used() const { return peak_used_; }

 private:
  struct OwnerBytes {
    Bytes young = 0;
    Bytes old = 0;
    Bytes young_cached = 0;
    Bytes old_cached = 0;
  };

  GcEvent collect_minor(bool* ran_full);
  Bytes promote();
  void record(GcEvent e);
  void touch_peak();

  HeapConfig config_;
  Bytes young_cap_;
  Bytes old_cap_;

  Bytes temp_ = 0;
  Bytes young_dead_ = 0;
  Bytes young_live_ = 0;
  Bytes old_live_ = 0;
  Bytes old_dead_ = 0;
  std::map<OwnerId, OwnerBytes> owners_;

  Bytes estimate_bytes_ = 0;
  std::vector<GcEvent> gc_log_;
  std::int64_t cumulative_pause_ns_ = 0;
  Bytes peak_used_ = 0;
};

}  // namespace murs::heap
