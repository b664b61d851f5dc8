#pragma once

#include <cstdint>
#include <functional>

namespace fraclab {

/// Process-wide worker count for the tiled reductions (1 = sequential).
void set_worker_count(int workers);
int worker_count();

/// Deterministic parallel sum: the index range is cut into fixed-size tiles,
/// each tile is summed in index order, and the per-tile partials are reduced
/// in tile order. The result is bit-identical for any worker count.
double tiled_sum(std::int64_t count,
                 const std::function<double(std::int64_t begin, std::int64_t end)>& tile_sum,
                 std::int64_t tile = 1 << 12);

/// Deterministic parallel for over tiles (used for per-node output arrays,
/// where slots are disjoint and order is irrelevant).
void tiled_for(std::int64_t count,
               const std::function<void(std::int64_t begin, std::int64_t end)>& body,
               std::int64_t tile = 1 << 10);

} // namespace fraclab
