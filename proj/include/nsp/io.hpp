#pragma once

#include "nsp/extraction.hpp"
#include "nsp/field.hpp"
#include "nsp/geometry.hpp"
#include "nsp/trainer.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nsp {

// Raised by every reader/parser in this header with a message that names the
// offending file, line (or element row), and what was expected.
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Point clouds. The format is chosen by file extension (case-insensitive):
//   .xyz/.txt  whitespace-separated ascii, first three columns per line are
//              x y z; extra columns (normals, colors) are ignored
//   .obj       vertex ("v") lines only; faces and other records are ignored
//   .ply       ascii or binary_little_endian; reads the x/y/z properties of
//              the "vertex" element, ignoring all other properties/elements
// All readers reject non-finite coordinates and empty inputs.
// ---------------------------------------------------------------------------

PointCloud read_point_cloud(const std::string& path);

// Writers mirror the reader formats. PLY defaults to ascii (float32
// precision, round-trips to ~1e-7); binary stores float64 exactly.
void write_point_cloud(const std::string& path, const PointCloud& cloud,
                       bool binary_ply = false);

// ---------------------------------------------------------------------------
// Triangle meshes (.obj or .ply by extension). OBJ faces use 1-based indices,
// PLY faces 0-based; both round-trip coordinates and topology exactly.
// Readers triangulate polygonal faces as fans and accept ascii or binary
// little-endian PLY. Writing an empty mesh is an error.
// ---------------------------------------------------------------------------

TriangleMesh read_mesh(const std::string& path);
void write_mesh(const TriangleMesh& mesh, const std::string& path,
                bool binary_ply = false);

// ---------------------------------------------------------------------------
// Planar cross-sections for external contour/quiver plotting. The slice
// plane is axis = offset (axis 0/1/2 for x/y/z); the lattice covers the
// remaining two axes (in ascending axis order: u then v) with `resolution`
// points per side spanning [-1, 1] inclusive. Output is CSV with header
// "u,v,d,G_u,G_v" followed by exactly resolution^2 rows; G_u/G_v are the
// in-plane components of the unit direction G.
// ---------------------------------------------------------------------------

std::string format_slice(const FieldView& field, int axis, double offset,
                         int resolution);
void export_slice(const FieldView& field, int axis, double offset,
                  int resolution, const std::string& path);

// ---------------------------------------------------------------------------
// Experiment configuration. A run is fully described by one RunConfig,
// parseable from a plain-text file of `key = value` lines ('#' comments).
// Every key has a default; unknown keys are errors. The `profile` key
// (full | desk) swaps in a coherent preset of network size, epoch count,
// batch sizes, and extraction grid; it is applied before the remaining keys
// regardless of its position in the file, so explicit keys always win.
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string input;             // point-cloud path ("" = use shape preset)
    std::string shape;             // analytic preset name for toy runs
    std::string profile = "desk";  // full | desk
    std::string out_dir = "out";
    // Ingest rescaling: "auto" rescales only when the cloud leaves the
    // [-1,1]^3 domain, "always" forces it, "never" rejects outliers.
    std::string normalize = "auto";
    uint64_t seed = 0;

    MlpConfig model;
    TrainConfig train;
    ExtractionConfig extraction;

    void validate() const;
};

// Preset bundles. "full": width 512 / depth 6, 60000 epochs, 20000-point
// batches, extraction grid 256. "desk": width 128 / depth 4, 3000 epochs,
// reduced batches, grid 64 — sized for a single CPU core.
RunConfig default_run_config(const std::string& profile = "desk");

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Serializes every key in a fixed order; the result parses back to an
// identical config, which is what run manifests rely on.
std::string format_run_config(const RunConfig& config);

// Every CLI run drops a manifest next to its artifacts: the resolved config,
// the exact command line, and the artifact version string.
extern const char* const kArtifactVersion;
void write_manifest(const std::string& path, const RunConfig& config,
                    const std::string& command);

}  // namespace nsp
