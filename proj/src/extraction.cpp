#include "nsp/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

#include "nsp/sampler.hpp"

namespace nsp {

void ExtractionConfig::validate() const {
    auto bad = [](const std::string& what) {
        throw std::invalid_argument("invalid extraction config: " + what);
    };
    if (grid_n < 1) bad("grid_n must be >= 1");
    if (eta < 0.0 || !std::isfinite(eta)) bad("eta must be >= 0");
    if (samples_per_cell < 1) bad("samples_per_cell must be >= 1");
    if (enlargement < 0.0 || enlargement >= 1.0)
        bad("enlargement must lie in [0, 1)");
    if (smooth_iterations < 0) bad("smooth_iterations must be >= 0");
    if (!(smooth_step > 0.0) || smooth_step > 1.0)
        bad("smooth_step must lie in (0, 1]");
    if (!(min_component_area_fraction >= 0.0) ||
        min_component_area_fraction >= 1.0)
        bad("min_component_area_fraction must lie in [0, 1)");
}

CellSet rough_filter(const FieldView& field, const GridSpec& grid, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("rough_filter: eta must be > 0");
    const int n = grid.n;
    const uint64_t m = uint64_t(n) + 1;

    // Corner-lattice distances, evaluated plane by plane so the position
    // buffer stays small while every corner is computed exactly once.
    std::vector<double> corner_d(m * m * m);
    std::vector<Vec3> plane(m * m);
    for (int k = 0; k <= n; ++k) {
        size_t at = 0;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i) plane[at++] = grid.corner_pos(i, j, k);
        field_values(field, plane.data(), plane.size(),
                     corner_d.data() + grid.corner_linear(0, 0, k), nullptr);
    }

    CellSet out;
    out.grid = grid;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                bool keep = false;
                for (int dk = 0; dk < 2 && !keep; ++dk)
                    for (int dj = 0; dj < 2 && !keep; ++dj)
                        for (int di = 0; di < 2 && !keep; ++di)
                            keep = corner_d[grid.corner_linear(
                                       i + di, j + dj, k + dk)] < eta;
                if (keep) out.cells.push_back(grid.linear({i, j, k}));
            }
    return out;
}

CellSet determine_cells(const FieldView& field, const CellSet& cells,
                        const ExtractionConfig& config) {
    config.validate();
    const GridSpec& grid = cells.grid;
    const int per_cell = config.samples_per_cell;
    const uint64_t stream = split_seed(config.seed, Stream::kExtraction);

    CellSet out;
    out.grid = grid;

    // Process cells in blocks so field evaluations batch well; per-cell seeds
    // keep the result independent of the blocking.
    const size_t block = std::max<size_t>(1, 16384 / size_t(per_cell));
    std::vector<Vec3> samples, pulled_forward;
    std::vector<double> d_unused, cand_d;
    std::vector<Vec3> cands;

    for (size_t begin = 0; begin < cells.cells.size(); begin += block) {
        const size_t count = std::min(block, cells.cells.size() - begin);

        samples.resize(count * per_cell);
        for (size_t c = 0; c < count; ++c) {
            const uint64_t id = cells.cells[begin + c];
            Box3 box = cell_box(grid, grid.unlinear(id));
            std::mt19937_64 rng(split_seed(stream, id));
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (int s = 0; s < per_cell; ++s)
                samples[c * per_cell + s] = {
                    box.lo.x + u(rng) * (box.hi.x - box.lo.x),
                    box.lo.y + u(rng) * (box.hi.y - box.lo.y),
                    box.lo.z + u(rng) * (box.hi.z - box.lo.z)};
        }

        pulled_forward.resize(samples.size());
        d_unused.resize(samples.size());
        field_values(field, samples.data(), samples.size(), d_unused.data(),
                     pulled_forward.data());

        // Containment test, then one batched distance pass over survivors.
        cands.clear();
        std::vector<std::pair<size_t, size_t>> ranges(count);  // into cands
        for (size_t c = 0; c < count; ++c) {
            const uint64_t id = cells.cells[begin + c];
            Box3 grown =
                enlarge(cell_box(grid, grid.unlinear(id)), 1.0 + config.enlargement);
            size_t start = cands.size();
            for (int s = 0; s < per_cell; ++s) {
                size_t at = c * per_cell + s;
                Vec3 y = samples[at] - pulled_forward[at];
                if (grown.contains(y)) cands.push_back(y);
            }
            ranges[c] = {start, cands.size()};
        }
        cand_d.resize(cands.size());
        if (!cands.empty())
            field_values(field, cands.data(), cands.size(), cand_d.data(),
                         nullptr);

        for (size_t c = 0; c < count; ++c) {
            auto [lo, hi] = ranges[c];
            if (lo == hi) continue;  // no pulled sample stayed in the cell
            size_t best = lo;
            for (size_t k = lo + 1; k < hi; ++k)
                if (cand_d[k] < cand_d[best]) best = k;
            out.cells.push_back(cells.cells[begin + c]);
            out.representative.push_back(cands[best]);
        }
    }
    return out;
}

namespace {

// Index of `id` in the sorted list, or npos.
size_t find_cell(const std::vector<uint64_t>& sorted, uint64_t id) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
    if (it == sorted.end() || *it != id) return size_t(-1);
    return size_t(it - sorted.begin());
}

// Choose the split diagonal: true = (0,2), false = (1,3).
bool split_first_diagonal(const std::array<Vec3, 4>& q) {
    return dist(q[0], q[2]) <= dist(q[1], q[3]);
}

// Shorter-diagonal triangulation of every quad, skipping degenerate output,
// compacted to the vertices actually referenced (in order of first use).
TriangleMesh triangles_from_quads(const QuadMesh& qm) {
    TriangleMesh full;
    full.vertices = qm.vertices;
    for (const auto& q : qm.quads) {
        std::array<Vec3, 4> pos = {qm.vertices[q[0]], qm.vertices[q[1]],
                                   qm.vertices[q[2]], qm.vertices[q[3]]};
        auto emit = [&](uint32_t a, uint32_t b, uint32_t c) {
            if (a == b || b == c || a == c) return;
            if (triangle_area(full.vertices[a], full.vertices[b],
                              full.vertices[c]) <= 0.0)
                return;
            full.triangles.push_back({a, b, c});
        };
        std::vector<uint32_t> distinct;
        for (uint32_t idx : q) {
            bool dup = false;
            for (uint32_t seen : distinct)
                dup = dup ||
                      dist(qm.vertices[idx], qm.vertices[seen]) == 0.0;
            if (!dup) distinct.push_back(idx);
        }
        if (distinct.size() < 3) continue;
        if (distinct.size() == 3) {
            emit(distinct[0], distinct[1], distinct[2]);
            continue;
        }
        if (split_first_diagonal(pos)) {
            emit(q[0], q[1], q[2]);
            emit(q[0], q[2], q[3]);
        } else {
            emit(q[0], q[1], q[3]);
            emit(q[1], q[2], q[3]);
        }
    }

    // Drop vertices that only degenerate triangles referenced.
    std::vector<uint32_t> remap(full.vertices.size(), UINT32_MAX);
    TriangleMesh compact;
    for (const auto& t : full.triangles) {
        std::array<uint32_t, 3> nt;
        for (int v = 0; v < 3; ++v) {
            if (remap[t[v]] == UINT32_MAX) {
                remap[t[v]] = uint32_t(compact.vertices.size());
                compact.vertices.push_back(full.vertices[t[v]]);
            }
            nt[v] = remap[t[v]];
        }
        compact.triangles.push_back(nt);
    }
    return compact;
}

}  // namespace

std::vector<std::array<Vec3, 3>> triangulate_quad(
    const std::array<Vec3, 4>& quad) {
    // Drop corners that coincide with an earlier one.
    std::vector<Vec3> distinct;
    for (const Vec3& p : quad) {
        bool dup = false;
        for (const Vec3& q : distinct) dup = dup || dist(p, q) == 0.0;
        if (!dup) distinct.push_back(p);
    }
    if (distinct.size() < 3) return {};
    if (distinct.size() == 3) return {{{distinct[0], distinct[1], distinct[2]}}};
    if (split_first_diagonal(quad))
        return {{{quad[0], quad[1], quad[2]}, {quad[0], quad[2], quad[3]}}};
    return {{{quad[0], quad[1], quad[3]}, {quad[1], quad[2], quad[3]}}};
}

ContourResult dual_contour(const CellSet& cells) {
    if (!cells.has_representatives())
        throw std::invalid_argument(
            "dual_contour: cells lack representative points");
    const GridSpec& grid = cells.grid;
    const int n = grid.n;

    // One quad per interior grid edge whose four surrounding cells are all
    // present, corners in cyclic order around the edge.  Edges are visited
    // axis by axis in lattice order, so output order is deterministic.
    std::vector<std::array<size_t, 4>> quad_slots;
    auto try_edge = [&](uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3) {
        size_t s0 = find_cell(cells.cells, c0);
        if (s0 == size_t(-1)) return;
        size_t s1 = find_cell(cells.cells, c1);
        if (s1 == size_t(-1)) return;
        size_t s2 = find_cell(cells.cells, c2);
        if (s2 == size_t(-1)) return;
        size_t s3 = find_cell(cells.cells, c3);
        if (s3 == size_t(-1)) return;
        quad_slots.push_back({s0, s1, s2, s3});
    };
    auto cell = [&](int i, int j, int k) { return grid.linear({i, j, k}); };

    for (int k = 1; k < n; ++k)  // edges along x
        for (int j = 1; j < n; ++j)
            for (int i = 0; i < n; ++i)
                try_edge(cell(i, j - 1, k - 1), cell(i, j, k - 1), cell(i, j, k),
                         cell(i, j - 1, k));
    for (int k = 1; k < n; ++k)  // edges along y
        for (int j = 0; j < n; ++j)
            for (int i = 1; i < n; ++i)
                try_edge(cell(i - 1, j, k - 1), cell(i, j, k - 1), cell(i, j, k),
                         cell(i - 1, j, k));
    for (int k = 0; k < n; ++k)  // edges along z
        for (int j = 1; j < n; ++j)
            for (int i = 1; i < n; ++i)
                try_edge(cell(i - 1, j - 1, k), cell(i, j - 1, k), cell(i, j, k),
                         cell(i - 1, j, k));

    // Compact to the vertices actually referenced.
    std::vector<uint32_t> slot_to_vertex(cells.cells.size(), UINT32_MAX);
    ContourResult out;
    auto vertex_of = [&](size_t slot) {
        if (slot_to_vertex[slot] == UINT32_MAX) {
            slot_to_vertex[slot] = uint32_t(out.quads.vertices.size());
            out.quads.vertices.push_back(cells.representative[slot]);
        }
        return slot_to_vertex[slot];
    };
    for (const auto& q : quad_slots)
        out.quads.quads.push_back(
            {vertex_of(q[0]), vertex_of(q[1]), vertex_of(q[2]), vertex_of(q[3])});

    out.triangles = triangles_from_quads(out.quads);
    return out;
}

QuadMesh remove_dangling_quads(const QuadMesh& quads) {
    auto side = [](uint32_t a, uint32_t b) {
        if (a > b) std::swap(a, b);
        return (uint64_t(a) << 32) | b;
    };

    std::vector<char> alive(quads.quads.size(), 1);
    bool removed_any = false;
    for (;;) {
        std::unordered_map<uint64_t, int> mult;
        for (size_t q = 0; q < quads.quads.size(); ++q)
            if (alive[q])
                for (int e = 0; e < 4; ++e)
                    ++mult[side(quads.quads[q][e], quads.quads[q][(e + 1) % 4])];

        size_t pick = size_t(-1);
        for (size_t q = 0; q < quads.quads.size() && pick == size_t(-1); ++q) {
            if (!alive[q]) continue;
            bool open_side = false, paired_side = false, fin_base = false;
            for (int e = 0; e < 4; ++e) {
                int m = mult[side(quads.quads[q][e], quads.quads[q][(e + 1) % 4])];
                open_side |= m == 1;
                paired_side |= m == 2;
                fin_base |= m >= 3;
            }
            if (open_side && fin_base && !paired_side) pick = q;
        }
        if (pick == size_t(-1)) break;
        alive[pick] = 0;
        removed_any = true;
    }
    if (!removed_any) return quads;

    QuadMesh out;
    std::vector<uint32_t> remap(quads.vertices.size(), UINT32_MAX);
    for (size_t q = 0; q < quads.quads.size(); ++q) {
        if (!alive[q]) continue;
        std::array<uint32_t, 4> nq;
        for (int v = 0; v < 4; ++v) {
            uint32_t old = quads.quads[q][v];
            if (remap[old] == UINT32_MAX) {
                remap[old] = uint32_t(out.vertices.size());
                out.vertices.push_back(quads.vertices[old]);
            }
            nq[v] = remap[old];
        }
        out.quads.push_back(nq);
    }
    return out;
}

TriangleMesh laplacian_smooth(const TriangleMesh& mesh, int iterations,
                              double step) {
    if (iterations < 0)
        throw std::invalid_argument("laplacian_smooth: negative iterations");
    if (!(step > 0.0) || step > 1.0)
        throw std::invalid_argument("laplacian_smooth: step must lie in (0, 1]");

    // Edge-connected 1-ring neighborhoods with duplicates removed.
    std::vector<std::vector<uint32_t>> ring(mesh.vertices.size());
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            uint32_t a = t[e], b = t[(e + 1) % 3];
            ring[a].push_back(b);
            ring[b].push_back(a);
        }
    for (auto& r : ring) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }

    TriangleMesh out = mesh;
    std::vector<Vec3> next(out.vertices.size());
    for (int it = 0; it < iterations; ++it) {
        for (size_t v = 0; v < out.vertices.size(); ++v) {
            if (ring[v].empty()) {
                next[v] = out.vertices[v];
                continue;
            }
            Vec3 avg{0, 0, 0};
            for (uint32_t nb : ring[v]) avg = avg + out.vertices[nb];
            avg = avg / double(ring[v].size());
            next[v] = out.vertices[v] + step * (avg - out.vertices[v]);
        }
        out.vertices.swap(next);
    }
    return out;
}

TriangleMesh remove_small_components(const TriangleMesh& mesh,
                                     double min_fraction) {
    if (mesh.triangles.empty()) return mesh;

    // Union-find over vertices through triangle membership.
    std::vector<uint32_t> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0u);
    std::function<uint32_t(uint32_t)> find = [&](uint32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    auto unite = [&](uint32_t a, uint32_t b) { parent[find(a)] = find(b); };
    for (const auto& t : mesh.triangles) {
        unite(t[0], t[1]);
        unite(t[1], t[2]);
    }

    std::unordered_map<uint32_t, double> area;
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        double a = triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]],
                                 mesh.vertices[t[2]]);
        area[find(t[0])] += a;
        total += a;
    }
    if (!(total > 0.0)) return mesh;

    TriangleMesh out;
    std::vector<uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
    for (const auto& t : mesh.triangles) {
        if (area[find(t[0])] < min_fraction * total) continue;
        std::array<uint32_t, 3> nt;
        for (int v = 0; v < 3; ++v) {
            if (remap[t[v]] == UINT32_MAX) {
                remap[t[v]] = uint32_t(out.vertices.size());
                out.vertices.push_back(mesh.vertices[t[v]]);
            }
            nt[v] = remap[t[v]];
        }
        out.triangles.push_back(nt);
    }
    return out;
}

ExtractionResult extract(const FieldView& field,
                         const ExtractionConfig& config) {
    config.validate();
    GridSpec grid = GridSpec::make(Domain{}.box, config.grid_n);

    ExtractionResult result;
    result.counts.total_cells = grid.cell_count();

    CellSet rough = rough_filter(field, grid, config.threshold());
    result.counts.after_rough_filter = rough.cells.size();

    CellSet determined = determine_cells(field, rough, config);
    result.counts.after_determination = determined.cells.size();

    ContourResult contour =
        determined.cells.empty() ? ContourResult{} : dual_contour(determined);
    QuadMesh kept = remove_dangling_quads(contour.quads);
    result.counts.quads = kept.quads.size();
    TriangleMesh surface = kept.quads.size() == contour.quads.quads.size()
                               ? std::move(contour.triangles)
                               : triangles_from_quads(kept);

    TriangleMesh mesh = laplacian_smooth(surface, config.smooth_iterations,
                                         config.smooth_step);
    if (config.filter_small_components)
        mesh = remove_small_components(mesh, config.min_component_area_fraction);
    result.counts.triangles = mesh.triangles.size();

    if (mesh.triangles.empty()) {
        std::string msg =
            "no surface found (cells kept: rough filter " +
            std::to_string(result.counts.after_rough_filter) +
            ", determination " +
            std::to_string(result.counts.after_determination) + ", quads " +
            std::to_string(result.counts.quads) + ")";
        throw ExtractionError(msg, result.counts);
    }

    result.mesh = std::move(mesh);
    result.quads = std::move(kept);
    return result;
}

}  // namespace nsp
