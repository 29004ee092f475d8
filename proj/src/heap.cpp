#include "murs/heap.hpp"

#include <algorithm>
#include <cmath>

#include "murs/error.hpp"

namespace murs::heap {

std::string_view to_string(GcKind k) { return k == GcKind::Minor ? "minor" : "full"; }

std::string_view to_string(PressureLevel p) {
  switch (p) {
    case PressureLevel::Normal: return "normal";
    case PressureLevel::Yellow: return "yellow";
    case PressureLevel::Red: return "red";
  }
  return "?";
}

void validate(const HeapConfig& c) {
  if (c.total_bytes == 0) throw SpecError("heap total_bytes must be positive");
  if (!(c.young_fraction > 0.0 && c.young_fraction < 1.0)) throw SpecError("young_fraction must be in (0,1)");
  if (!(c.yellow > 0.0 && c.yellow < c.red && c.red < 1.0)) throw SpecError("thresholds need 0 < yellow < red < 1");
  if (c.minor_pause_ns_per_surviving_byte < 0 || c.full_pause_ns_per_live_byte < 0) {
    throw SpecError("GC pause costs must be non-negative");
  }
}

PressureLevel pressure_level(double fraction, const HeapConfig& c) {
  if (fraction < c.yellow) return PressureLevel::Normal;
  if (fraction < c.red) return PressureLevel::Yellow;
  return PressureLevel::Red;
}

Heap::Heap(HeapConfig config) : config_(config) {
  validate(config_);
  young_cap_ = config_.young_bytes();
  old_cap_ = config_.old_bytes();
}

double Heap::long_living_fraction() const {
  return static_cast<double>(estimate_bytes_) / static_cast<double>(config_.total_bytes);
}

Bytes Heap::owner_live(OwnerId owner) const {
  auto it = owners_.find(owner);
  return it == owners_.end() ? 0 : it->second.young + it->second.old + it->second.young_cached + it->second.old_cached;
}

Bytes Heap::owner_cached(OwnerId owner) const {
  auto it = owners_.find(owner);
  return it == owners_.end() ? 0 : it->second.young_cached + it->second.old_cached;
}

HeapSnapshot Heap::snapshot() const {
  HeapSnapshot s;
  s.total_bytes = config_.total_bytes;
  s.young_used = young_used();
  s.old_used = old_used();
  s.live_long_living = live_long_living();
  s.long_living_fraction = long_living_fraction();
  s.level = pressure();
  s.free_bytes = config_.total_bytes > estimate_bytes_ ? config_.total_bytes - estimate_bytes_ : 0;
  return s;
}

void Heap::touch_peak() { peak_used_ = std::max(peak_used_, used()); }

void Heap::record(GcEvent e) {
  cumulative_pause_ns_ += e.pause_ns;
  gc_log_.push_back(e);
}

Bytes Heap::promote() {
  Bytes promoted = 0;
  for (auto& [id, o] : owners_) {
    if (young_live_ == 0) break;
    for (auto [from, to] : {std::pair{&o.young, &o.old}, std::pair{&o.young_cached, &o.old_cached}}) {
      const Bytes room = old_cap_ - old_used();
      const Bytes move = std::min(*from, room);
      *from -= move;
      *to += move;
      young_live_ -= move;
      old_live_ += move;
      promoted += move;
    }
  }
  return promoted;
}

GcEvent Heap::collect_minor(bool* ran_full) {
  GcEvent e;
  e.kind = GcKind::Minor;
  e.reclaimed_bytes = temp_ + young_dead_;
  temp_ = 0;
  young_dead_ = 0;
  e.surviving_bytes = young_live_;
  e.promoted_or_reclaimed_bytes = promote();
  e.pause_ns = std::llround(config_.minor_pause_ns_per_surviving_byte * static_cast<double>(e.surviving_bytes));
  estimate_bytes_ = old_used() + young_live_;
  e.heap_usage_after = long_living_fraction();
  record(e);
  if (ran_full) *ran_full = false;
  if (young_live_ > 0) {
    // Promotion failed: the old generation is full.
    full_gc();
    if (ran_full) *ran_full = true;
  }
  return e;
}

GcEvent Heap::minor_gc() { return collect_minor(nullptr); }

GcEvent Heap::full_gc() {
  GcEvent e;
  e.kind = GcKind::Full;
  e.reclaimed_bytes = temp_ + young_dead_ + old_dead_;
  e.promoted_or_reclaimed_bytes = e.reclaimed_bytes;
  temp_ = 0;
  young_dead_ = 0;
  old_dead_ = 0;
  e.surviving_bytes = live_long_living();
  e.pause_ns = std::llround(config_.full_pause_ns_per_live_byte * static_cast<double>(e.surviving_bytes));
  promote();
  estimate_bytes_ = live_long_living();
  e.heap_usage_after = long_living_fraction();
  record(e);
  return e;
}

AllocStatus Heap::allocate(const Allocation& a) {
  if (a.bytes == 0) throw SpecError("allocation of zero bytes");
  const Bytes b = a.bytes;

  if (b > young_cap_) {
    // Too large for the nursery: goes straight to the old generation.
    if (a.kind == AllocKind::Temporary) {
      if (old_used() + b > old_cap_) full_gc();
      if (old_used() + b > old_cap_) return AllocStatus::OutOfMemory;
      old_dead_ += b;  // dies immediately; reclaimed at the next full GC
      touch_peak();
      return AllocStatus::Ok;
    }
    if (old_used() + b > old_cap_) full_gc();
    if (old_used() + b > old_cap_) return AllocStatus::OutOfMemory;
    auto& o = owners_[a.owner];
    (a.cached ? o.old_cached : o.old) += b;
    old_live_ += b;
    touch_peak();
    return AllocStatus::Ok;
  }

  if (young_used() + b > young_cap_) {
    bool ran_full = false;
    collect_minor(&ran_full);
    if (young_used() + b > young_cap_) {
      if (!ran_full) full_gc();
      if (young_used() + b > young_cap_) return AllocStatus::OutOfMemory;
    }
  }

  if (a.kind == AllocKind::Temporary) {
    temp_ += b;
  } else {
    auto& o = owners_[a.owner];
    (a.cached ? o.young_cached : o.young) += b;
    young_live_ += b;
  }
  touch_peak();
  return AllocStatus::Ok;
}

void Heap::free_task_memory(OwnerId owner) {
  auto it = owners_.find(owner);
  if (it == owners_.end()) return;
  auto& o = it->second;
  young_dead_ += o.young;
  young_live_ -= o.young;
  old_dead_ += o.old;
  old_live_ -= o.old;
  o.young = 0;
  o.old = 0;
  if (o.young_cached == 0 && o.old_cached == 0) owners_.erase(it);
}

void Heap::free_cached(OwnerId owner) {
  auto it = owners_.find(owner);
  if (it == owners_.end()) return;
  auto& o = it->second;
  young_dead_ += o.young_cached;
  young_live_ -= o.young_cached;
  old_dead_ += o.old_cached;
  old_live_ -= o.old_cached;
  o.young_cached = 0;
  o.old_cached = 0;
  if (o.young == 0 && o.old == 0) owners_.erase(it);
}

Bytes Heap::release(OwnerId owner, Bytes bytes) {
  auto it = owners_.find(owner);
  if (it == owners_.end()) return 0;
  auto& o = it->second;
  const Bytes from_old = std::min(bytes, o.old);
  o.old -= from_old;
  old_live_ -= from_old;
  old_dead_ += from_old;
  const Bytes from_young = std::min(bytes - from_old, o.young);
  o.young -= from_young;
  young_live_ -= from_young;
  young_dead_ += from_young;
  return from_old + from_young;
}

}  // namespace murs::heap
