#pragma once

// Mesh extraction from a distance/direction field in three stages:
//  1. rough filtering — keep grid cells with a corner distance below a
//     threshold, sharing corner evaluations through an (N+1)^3 lattice;
//  2. cell determination — per kept cell, pull random samples toward the
//     surface and keep the cell only when a pulled point lands in its
//     slightly enlarged box, recording the minimum-distance landing as the
//     cell's representative point;
//  3. dual contouring — connect the representative points of the four cells
//     around each interior grid edge into quads, peel off dangling fin quads,
//     triangulate along shorter diagonals, and relax with Laplacian smoothing.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsp/field.hpp"
#include "nsp/geometry.hpp"

namespace nsp {

struct ExtractionConfig {
    int grid_n = 256;
    double eta = 0.0;  // corner-distance keep threshold; 0 = auto (2 / grid_n)
    int samples_per_cell = 200;
    double enlargement = 0.07;  // relative growth of the containment box
    int smooth_iterations = 3;
    double smooth_step = 0.5;
    uint64_t seed = 0;
    // Post-processing for noisy inputs: drop connected components whose area
    // is below min_component_area_fraction of the total. Off by default.
    bool filter_small_components = false;
    double min_component_area_fraction = 0.01;

    double threshold() const { return eta > 0.0 ? eta : 2.0 / grid_n; }
    void validate() const;  // throws std::invalid_argument
};

// Cells surviving a stage, as sorted linear indices into `grid`; after stage
// 2 each cell carries its representative point (aligned with `cells`).
struct CellSet {
    GridSpec grid;
    std::vector<uint64_t> cells;
    std::vector<Vec3> representative;  // empty until stage 2

    bool has_representatives() const {
        return representative.size() == cells.size();
    }
};

// Stage 1: keep a cell iff any of its 8 corners has distance < eta.
CellSet rough_filter(const FieldView& field, const GridSpec& grid, double eta);

// Stage 2: per-cell sampling, pulling, containment test against the enlarged
// cell box, and representative-point selection (arg-min distance among the
// contained pulled points, first-hit tie break).  Deterministic per
// (config.seed, cell index) regardless of processing order.
CellSet determine_cells(const FieldView& field, const CellSet& cells,
                        const ExtractionConfig& config);

// Stage 3: one quad per interior grid edge whose four surrounding cells all
// carry representative points, in cyclic order around the edge; quads split
// along their shorter diagonal.  Both the quad and triangle meshes reference
// only vertices used by at least one face.
struct ContourResult {
    QuadMesh quads;
    TriangleMesh triangles;
};
ContourResult dual_contour(const CellSet& cells);

// Split one quad along its shorter diagonal (ties: the first diagonal in
// vertex order).  A quad with two coincident corners yields one triangle;
// fewer than three distinct corners yield none.
std::vector<std::array<Vec3, 3>> triangulate_quad(
    const std::array<Vec3, 4>& quad);

// Removes fin quads that dangle off the rest of the quad mesh.  The enlarged
// containment box in stage 2 can keep a cell the surface only grazes; such a
// cell joins at most one full edge ring, and its lone quad hangs off the
// surface by open (single-quad) sides.  A quad is dropped — lowest index
// first, one at a time — when at least one side belongs to no other quad,
// no side is shared with exactly one other quad, and at least one side is
// shared with two or more.  Removal therefore only ever deletes open sides:
// rims of open sheets (bordered by two-quad interior sides) and isolated
// quads are never touched, and the pass terminates because each removal
// strictly reduces the number of open sides.  Unreferenced vertices are
// compacted away; with nothing to peel the mesh is returned unchanged.
QuadMesh remove_dangling_quads(const QuadMesh& quads);

// Uniform Laplacian smoothing: every iteration synchronously moves each
// vertex by `step` toward the average of its edge-connected neighbors.
// Connectivity is unchanged. Requires 0 < step <= 1, iterations >= 0.
TriangleMesh laplacian_smooth(const TriangleMesh& mesh, int iterations,
                              double step);

// Connected-component area filter (components connected via shared vertex
// indices; drops those below `min_fraction` of total area).
TriangleMesh remove_small_components(const TriangleMesh& mesh,
                                     double min_fraction);

struct StageCounts {
    uint64_t total_cells = 0;
    uint64_t after_rough_filter = 0;
    uint64_t after_determination = 0;
    uint64_t quads = 0;
    uint64_t triangles = 0;
};

struct ExtractionResult {
    TriangleMesh mesh;
    QuadMesh quads;
    StageCounts counts;
};

struct ExtractionError : std::runtime_error {
    StageCounts counts;
    ExtractionError(const std::string& what, StageCounts c)
        : std::runtime_error(what), counts(c) {}
};

// Full pipeline over the default domain grid: rough filter, cell
// determination, dual contouring, dangling-fin removal, smoothing, and the
// optional small-component filter.  Throws ExtractionError ("no surface
// found", with stage counts) when nothing survives.
ExtractionResult extract(const FieldView& field, const ExtractionConfig& config);

}  // namespace nsp
