#include "nsp/io.hpp"

#include "nsp/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace nsp {

const char* const kArtifactVersion = "nsp 0.1.0";

namespace {

[[noreturn]] void fail(const std::string& msg) { throw IoError(msg); }

std::string lower_ext(const std::string& path) {
    size_t dot = path.find_last_of('.');
    size_t sep = path.find_last_of("/\\");
    if (dot == std::string::npos || (sep != std::string::npos && dot < sep)) return "";
    std::string ext = path.substr(dot + 1);
    for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) fail(path + ": read failure");
    return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path + ": cannot open file for writing");
    out.write(data.data(), std::streamsize(data.size()));
    out.flush();
    if (!out) fail(path + ": write failure");
}

std::string trim(std::string s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Splits into lines accepting \n and \r\n endings; keeps empty lines so the
// reported line numbers match the file.
std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        std::string line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = nl + 1;
    }
    return lines;
}

std::string at_line(const std::string& path, size_t line1) {
    return path + ":" + std::to_string(line1) + ": ";
}

// Parses exactly one double from a whole token.
bool token_to_double(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    char* end = nullptr;
    out = std::strtod(tok.c_str(), &end);
    return end == tok.c_str() + tok.size();
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream in(line);
    std::string t;
    while (in >> t) toks.push_back(std::move(t));
    return toks;
}

void require_finite_point(Vec3 p, const std::string& where) {
    if (!finite(p)) fail(where + "non-finite coordinate");
}

// ---------------------------------------------------------------------------
// XYZ / OBJ readers
// ---------------------------------------------------------------------------

PointCloud read_xyz(const std::string& path, const std::string& text) {
    PointCloud cloud;
    cloud.source = path;
    std::vector<std::string> lines = split_lines(text);
    for (size_t li = 0; li < lines.size(); ++li) {
        std::vector<std::string> toks = tokenize(lines[li]);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks.size() < 3)
            fail(at_line(path, li + 1) + "expected at least 3 numeric columns, got " +
                 std::to_string(toks.size()));
        Vec3 p;
        double* coord[3] = {&p.x, &p.y, &p.z};
        for (int c = 0; c < 3; ++c)
            if (!token_to_double(toks[size_t(c)], *coord[c]))
                fail(at_line(path, li + 1) + "column " + std::to_string(c + 1) +
                     " is not a number: '" + toks[size_t(c)] + "'");
        require_finite_point(p, at_line(path, li + 1));
        cloud.points.push_back(p);
    }
    if (cloud.points.empty()) fail(path + ": no points found");
    return cloud;
}

// Shared OBJ scan: collects vertices always, faces when `faces` is non-null.
void scan_obj(const std::string& path, const std::string& text,
              std::vector<Vec3>& vertices,
              std::vector<std::vector<int64_t>>* faces) {
    std::vector<std::string> lines = split_lines(text);
    for (size_t li = 0; li < lines.size(); ++li) {
        std::vector<std::string> toks = tokenize(lines[li]);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "v") {
            if (toks.size() < 4)
                fail(at_line(path, li + 1) + "vertex line needs 3 coordinates");
            Vec3 p;
            double* coord[3] = {&p.x, &p.y, &p.z};
            for (int c = 0; c < 3; ++c)
                if (!token_to_double(toks[size_t(c) + 1], *coord[c]))
                    fail(at_line(path, li + 1) + "bad vertex coordinate '" +
                         toks[size_t(c) + 1] + "'");
            require_finite_point(p, at_line(path, li + 1));
            vertices.push_back(p);
        } else if (faces && toks[0] == "f") {
            if (toks.size() < 4)
                fail(at_line(path, li + 1) + "face needs at least 3 vertices");
            std::vector<int64_t> idx;
            for (size_t t = 1; t < toks.size(); ++t) {
                // Face corners may carry /texture/normal references; only the
                // leading vertex index matters here.
                char* end = nullptr;
                long long v = std::strtoll(toks[t].c_str(), &end, 10);
                if (end == toks[t].c_str() || (*end != '\0' && *end != '/'))
                    fail(at_line(path, li + 1) + "bad face index '" + toks[t] + "'");
                if (v <= 0)
                    fail(at_line(path, li + 1) +
                         "face indices must be positive (relative indices unsupported)");
                idx.push_back(v - 1);  // to 0-based
            }
            faces->push_back(std::move(idx));
        }
    }
}

// ---------------------------------------------------------------------------
// PLY: header model plus ascii/binary value streams
// ---------------------------------------------------------------------------

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

size_t ply_type_size(PlyType t) {
    switch (t) {
        case PlyType::kInt8:
        case PlyType::kUint8: return 1;
        case PlyType::kInt16:
        case PlyType::kUint16: return 2;
        case PlyType::kInt32:
        case PlyType::kUint32:
        case PlyType::kFloat32: return 4;
        case PlyType::kFloat64: return 8;
    }
    return 0;
}

bool ply_type_from_name(const std::string& name, PlyType& out) {
    if (name == "char" || name == "int8") out = PlyType::kInt8;
    else if (name == "uchar" || name == "uint8") out = PlyType::kUint8;
    else if (name == "short" || name == "int16") out = PlyType::kInt16;
    else if (name == "ushort" || name == "uint16") out = PlyType::kUint16;
    else if (name == "int" || name == "int32") out = PlyType::kInt32;
    else if (name == "uint" || name == "uint32") out = PlyType::kUint32;
    else if (name == "float" || name == "float32") out = PlyType::kFloat32;
    else if (name == "double" || name == "float64") out = PlyType::kFloat64;
    else return false;
    return true;
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::kFloat32;
    bool is_list = false;
    PlyType count_type = PlyType::kUint8;
};

struct PlyElement {
    std::string name;
    uint64_t count = 0;
    std::vector<PlyProperty> props;

    const PlyProperty* find(const std::string& prop_name) const {
        for (const PlyProperty& p : props)
            if (p.name == prop_name) return &p;
        return nullptr;
    }
};

struct PlyHeader {
    bool binary = false;
    std::vector<PlyElement> elements;
    size_t data_offset = 0;  // byte offset of the first data byte
    size_t header_lines = 0;
};

PlyHeader parse_ply_header(const std::string& path, const std::string& text) {
    PlyHeader h;
    size_t pos = 0, line_no = 0;
    bool saw_format = false, done = false;
    while (pos < text.size() && !done) {
        size_t nl = text.find('\n', pos);
        size_t end = (nl == std::string::npos) ? text.size() : nl;
        std::string line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = (nl == std::string::npos) ? text.size() : nl + 1;
        ++line_no;

        std::vector<std::string> toks = tokenize(line);
        if (line_no == 1) {
            if (toks.size() != 1 || toks[0] != "ply")
                fail(at_line(path, 1) + "not a PLY file (missing 'ply' magic)");
            continue;
        }
        if (toks.empty()) fail(at_line(path, line_no) + "blank line inside PLY header");
        const std::string& kw = toks[0];
        if (kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            if (toks.size() != 3)
                fail(at_line(path, line_no) + "malformed format line");
            if (toks[1] == "ascii") h.binary = false;
            else if (toks[1] == "binary_little_endian") h.binary = true;
            else fail(at_line(path, line_no) + "unsupported PLY format '" + toks[1] + "'");
            saw_format = true;
        } else if (kw == "element") {
            if (toks.size() != 3)
                fail(at_line(path, line_no) + "malformed element line");
            PlyElement e;
            e.name = toks[1];
            char* endp = nullptr;
            unsigned long long n = std::strtoull(toks[2].c_str(), &endp, 10);
            if (endp != toks[2].c_str() + toks[2].size())
                fail(at_line(path, line_no) + "bad element count '" + toks[2] + "'");
            e.count = n;
            h.elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (h.elements.empty())
                fail(at_line(path, line_no) + "property before any element");
            PlyProperty p;
            if (toks.size() == 5 && toks[1] == "list") {
                p.is_list = true;
                if (!ply_type_from_name(toks[2], p.count_type) ||
                    !ply_type_from_name(toks[3], p.type))
                    fail(at_line(path, line_no) + "unknown list property type");
                p.name = toks[4];
            } else if (toks.size() == 3) {
                if (!ply_type_from_name(toks[1], p.type))
                    fail(at_line(path, line_no) + "unknown property type '" + toks[1] + "'");
                p.name = toks[2];
            } else {
                fail(at_line(path, line_no) + "malformed property line");
            }
            h.elements.back().props.push_back(std::move(p));
        } else if (kw == "end_header") {
            h.data_offset = pos;
            h.header_lines = line_no;
            done = true;
        } else {
            fail(at_line(path, line_no) + "unknown PLY header keyword '" + kw + "'");
        }
    }
    if (!done) fail(path + ": PLY header missing end_header");
    if (!saw_format) fail(path + ": PLY header missing format line");
    return h;
}

// Sequential value reader over the PLY data section, ascii or binary LE.
class PlyValues {
  public:
    PlyValues(const std::string& path, const std::string& text, const PlyHeader& h)
        : path_(path), text_(text), binary_(h.binary), pos_(h.data_offset),
          line_(h.header_lines) {}

    double next(PlyType type) {
        return binary_ ? next_binary(type) : next_ascii();
    }

    std::string where() const {
        return binary_ ? path_ + " (byte " + std::to_string(pos_) + "): "
                       : at_line(path_, line_ + 1);
    }

  private:
    double next_ascii() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        size_t start = pos_;
        while (pos_ < text_.size() &&
               !std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (start == pos_) fail(at_line(path_, line_ + 1) + "unexpected end of PLY data");
        std::string tok = text_.substr(start, pos_ - start);
        double v = 0.0;
        if (!token_to_double(tok, v))
            fail(at_line(path_, line_ + 1) + "bad PLY value '" + tok + "'");
        return v;
    }

    double next_binary(PlyType type) {
        size_t n = ply_type_size(type);
        if (pos_ + n > text_.size())
            fail(path_ + ": PLY data truncated at byte " + std::to_string(pos_));
        const char* src = text_.data() + pos_;
        pos_ += n;
        switch (type) {
            case PlyType::kInt8: { int8_t v; std::memcpy(&v, src, 1); return v; }
            case PlyType::kUint8: { uint8_t v; std::memcpy(&v, src, 1); return v; }
            case PlyType::kInt16: { int16_t v; std::memcpy(&v, src, 2); return v; }
            case PlyType::kUint16: { uint16_t v; std::memcpy(&v, src, 2); return v; }
            case PlyType::kInt32: { int32_t v; std::memcpy(&v, src, 4); return v; }
            case PlyType::kUint32: { uint32_t v; std::memcpy(&v, src, 4); return v; }
            case PlyType::kFloat32: { float v; std::memcpy(&v, src, 4); return double(v); }
            case PlyType::kFloat64: { double v; std::memcpy(&v, src, 8); return v; }
        }
        return 0.0;
    }

    const std::string& path_;
    const std::string& text_;
    bool binary_;
    size_t pos_;
    size_t line_;  // 0-based index of the last consumed header line
};

// Reads the PLY elements in declared order, capturing vertex positions and
// (when `faces` is non-null) the face index lists. Elements after the last
// needed one are not parsed.
void scan_ply(const std::string& path, const std::string& text,
              std::vector<Vec3>& vertices,
              std::vector<std::vector<int64_t>>* faces) {
    PlyHeader h = parse_ply_header(path, text);
    PlyValues values(path, text, h);

    const PlyElement* vertex_elem = nullptr;
    for (const PlyElement& e : h.elements)
        if (e.name == "vertex") { vertex_elem = &e; break; }
    if (!vertex_elem) fail(path + ": PLY file has no vertex element");

    size_t last_needed = 0;
    for (size_t i = 0; i < h.elements.size(); ++i) {
        const std::string& n = h.elements[i].name;
        if (n == "vertex" || (faces && n == "face")) last_needed = i;
    }

    for (size_t ei = 0; ei <= last_needed; ++ei) {
        const PlyElement& e = h.elements[ei];
        if (e.name == "vertex") {
            int xi = -1, yi = -1, zi = -1;
            for (size_t pi = 0; pi < e.props.size(); ++pi) {
                const PlyProperty& p = e.props[pi];
                if (p.is_list) continue;
                if (p.name == "x") xi = int(pi);
                if (p.name == "y") yi = int(pi);
                if (p.name == "z") zi = int(pi);
            }
            if (xi < 0 || yi < 0 || zi < 0)
                fail(path + ": PLY vertex element lacks x/y/z properties");
            vertices.reserve(vertices.size() + e.count);
            for (uint64_t r = 0; r < e.count; ++r) {
                Vec3 p;
                std::string where = values.where();
                for (size_t pi = 0; pi < e.props.size(); ++pi) {
                    const PlyProperty& prop = e.props[pi];
                    if (prop.is_list) {
                        uint64_t n = uint64_t(values.next(prop.count_type));
                        for (uint64_t k = 0; k < n; ++k) values.next(prop.type);
                        continue;
                    }
                    double v = values.next(prop.type);
                    if (int(pi) == xi) p.x = v;
                    if (int(pi) == yi) p.y = v;
                    if (int(pi) == zi) p.z = v;
                }
                if (!finite(p))
                    fail(where + "vertex " + std::to_string(r) +
                         ": non-finite coordinate");
                vertices.push_back(p);
            }
        } else if (faces && e.name == "face") {
            const PlyProperty* list = e.find("vertex_indices");
            if (!list) list = e.find("vertex_index");
            if (!list || !list->is_list)
                fail(path + ": PLY face element lacks a vertex_indices list");
            for (uint64_t r = 0; r < e.count; ++r) {
                std::vector<int64_t> idx;
                for (const PlyProperty& prop : e.props) {
                    if (prop.is_list) {
                        uint64_t n = uint64_t(values.next(prop.count_type));
                        bool keep = &prop == list;
                        for (uint64_t k = 0; k < n; ++k) {
                            double v = values.next(prop.type);
                            if (keep) idx.push_back(int64_t(v));
                        }
                    } else {
                        values.next(prop.type);
                    }
                }
                if (idx.size() < 3)
                    fail(path + ": PLY face " + std::to_string(r) +
                         " has fewer than 3 vertices");
                faces->push_back(std::move(idx));
            }
        } else {
            // Skip an unneeded element. Fixed-size rows could be skipped in
            // bulk, but list properties force a sequential walk anyway.
            for (uint64_t r = 0; r < e.count; ++r) {
                for (const PlyProperty& prop : e.props) {
                    if (prop.is_list) {
                        uint64_t n = uint64_t(values.next(prop.count_type));
                        for (uint64_t k = 0; k < n; ++k) values.next(prop.type);
                    } else {
                        values.next(prop.type);
                    }
                }
            }
        }
    }
}

TriangleMesh faces_to_mesh(const std::string& path, std::vector<Vec3> vertices,
                           const std::vector<std::vector<int64_t>>& faces) {
    TriangleMesh mesh;
    mesh.vertices = std::move(vertices);
    for (size_t f = 0; f < faces.size(); ++f) {
        const std::vector<int64_t>& idx = faces[f];
        for (int64_t v : idx)
            if (v < 0 || uint64_t(v) >= mesh.vertices.size())
                fail(path + ": face " + std::to_string(f) + " references vertex " +
                     std::to_string(v) + " out of range (have " +
                     std::to_string(mesh.vertices.size()) + ")");
        for (size_t t = 2; t < idx.size(); ++t)  // fan triangulation
            mesh.triangles.push_back({uint32_t(idx[0]), uint32_t(idx[t - 1]),
                                      uint32_t(idx[t])});
    }
    return mesh;
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public readers/writers
// ---------------------------------------------------------------------------

PointCloud read_point_cloud(const std::string& path) {
    std::string ext = lower_ext(path);
    std::string text = read_file(path);
    PointCloud cloud;
    if (ext == "xyz" || ext == "txt" || ext == "pts") {
        cloud = read_xyz(path, text);
    } else if (ext == "obj") {
        scan_obj(path, text, cloud.points, nullptr);
        cloud.source = path;
    } else if (ext == "ply") {
        scan_ply(path, text, cloud.points, nullptr);
        cloud.source = path;
    } else {
        fail(path + ": unsupported point-cloud format '." + ext + "'");
    }
    if (cloud.points.empty()) fail(path + ": no points found");
    return cloud;
}

void write_point_cloud(const std::string& path, const PointCloud& cloud,
                       bool binary_ply) {
    if (cloud.points.empty()) fail(path + ": refusing to write an empty point cloud");
    std::string ext = lower_ext(path);
    std::string out;
    if (ext == "xyz" || ext == "txt" || ext == "pts" || ext == "obj") {
        const char* prefix = (ext == "obj") ? "v " : "";
        for (Vec3 p : cloud.points)
            out += fmt("%s%.17g %.17g %.17g\n", prefix, p.x, p.y, p.z);
    } else if (ext == "ply") {
        out = "ply\n";
        out += binary_ply ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
        out += fmt("comment %s\n", kArtifactVersion);
        out += fmt("element vertex %zu\n", cloud.points.size());
        const char* t = binary_ply ? "double" : "float";
        out += fmt("property %s x\nproperty %s y\nproperty %s z\nend_header\n", t, t, t);
        if (binary_ply) {
            size_t base = out.size();
            out.resize(base + cloud.points.size() * 24);
            char* dst = out.data() + base;
            for (Vec3 p : cloud.points) {
                double c[3] = {p.x, p.y, p.z};
                std::memcpy(dst, c, 24);
                dst += 24;
            }
        } else {
            for (Vec3 p : cloud.points)
                out += fmt("%.9g %.9g %.9g\n", p.x, p.y, p.z);
        }
    } else {
        fail(path + ": unsupported point-cloud format '." + ext + "'");
    }
    write_file(path, out);
}

TriangleMesh read_mesh(const std::string& path) {
    std::string ext = lower_ext(path);
    std::string text = read_file(path);
    std::vector<Vec3> vertices;
    std::vector<std::vector<int64_t>> faces;
    if (ext == "obj") {
        scan_obj(path, text, vertices, &faces);
    } else if (ext == "ply") {
        scan_ply(path, text, vertices, &faces);
    } else {
        fail(path + ": unsupported mesh format '." + ext + "'");
    }
    if (vertices.empty()) fail(path + ": no vertices found");
    return faces_to_mesh(path, std::move(vertices), faces);
}

void write_mesh(const TriangleMesh& mesh, const std::string& path,
                bool binary_ply) {
    if (mesh.vertices.empty() || mesh.triangles.empty())
        fail(path + ": refusing to write an empty mesh");
    for (const auto& tri : mesh.triangles)
        for (uint32_t v : tri)
            if (v >= mesh.vertices.size())
                fail(path + ": triangle index " + std::to_string(v) + " out of range");

    std::string ext = lower_ext(path);
    std::string out;
    if (ext == "obj") {
        out += fmt("# %s\n", kArtifactVersion);
        for (Vec3 p : mesh.vertices)
            out += fmt("v %.17g %.17g %.17g\n", p.x, p.y, p.z);
        for (const auto& t : mesh.triangles)  // OBJ indices are 1-based
            out += fmt("f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    } else if (ext == "ply") {
        out = "ply\n";
        out += binary_ply ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
        out += fmt("comment %s\n", kArtifactVersion);
        out += fmt("element vertex %zu\n", mesh.vertices.size());
        out += "property double x\nproperty double y\nproperty double z\n";
        out += fmt("element face %zu\n", mesh.triangles.size());
        out += "property list uchar uint vertex_indices\nend_header\n";
        if (binary_ply) {
            for (Vec3 p : mesh.vertices) {
                double c[3] = {p.x, p.y, p.z};
                char buf[24];
                std::memcpy(buf, c, 24);
                out.append(buf, 24);
            }
            for (const auto& t : mesh.triangles) {
                char buf[13];
                buf[0] = 3;
                uint32_t idx[3] = {t[0], t[1], t[2]};
                std::memcpy(buf + 1, idx, 12);
                out.append(buf, 13);
            }
        } else {
            for (Vec3 p : mesh.vertices)
                out += fmt("%.17g %.17g %.17g\n", p.x, p.y, p.z);
            for (const auto& t : mesh.triangles)  // PLY indices are 0-based
                out += fmt("3 %u %u %u\n", t[0], t[1], t[2]);
        }
    } else {
        fail(path + ": unsupported mesh format '." + ext + "'");
    }
    write_file(path, out);
}

// ---------------------------------------------------------------------------
// Slice export
// ---------------------------------------------------------------------------

std::string format_slice(const FieldView& field, int axis, double offset,
                         int resolution) {
    if (axis < 0 || axis > 2) fail("slice axis must be 0 (x), 1 (y), or 2 (z)");
    if (resolution < 2) fail("slice resolution must be at least 2");
    if (!(std::abs(offset) <= 1.0))
        fail(fmt("slice plane at %g lies outside the [-1,1] domain", offset));
    if (!field.eval) fail("field view lacks an eval closure");

    const int ua = (axis == 0) ? 1 : 0;  // in-plane axes, ascending order
    const int va = (axis == 2) ? 1 : 2;
    auto set = [](Vec3& p, int a, double v) {
        if (a == 0) p.x = v;
        else if (a == 1) p.y = v;
        else p.z = v;
    };
    auto get = [](Vec3 p, int a) { return a == 0 ? p.x : (a == 1 ? p.y : p.z); };

    std::string out = "u,v,d,G_u,G_v\n";
    out.reserve(out.size() + size_t(resolution) * size_t(resolution) * 48);
    for (int i = 0; i < resolution; ++i) {
        double u = -1.0 + 2.0 * i / (resolution - 1);
        for (int j = 0; j < resolution; ++j) {
            double v = -1.0 + 2.0 * j / (resolution - 1);
            Vec3 p;
            set(p, axis, offset);
            set(p, ua, u);
            set(p, va, v);
            FieldEval e = field.eval(p);
            out += fmt("%.17g,%.17g,%.17g,%.17g,%.17g\n", u, v, e.d, get(e.G, ua),
                       get(e.G, va));
        }
    }
    return out;
}

void export_slice(const FieldView& field, int axis, double offset,
                  int resolution, const std::string& path) {
    write_file(path, format_slice(field, axis, offset, resolution));
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    if (profile != "full" && profile != "desk")
        fail("profile must be 'full' or 'desk', got '" + profile + "'");
    if (normalize != "auto" && normalize != "always" && normalize != "never")
        fail("normalize must be auto, always, or never, got '" + normalize + "'");
    model.validate();
    train.validate();
    extraction.validate();
}

RunConfig default_run_config(const std::string& profile) {
    RunConfig cfg;
    cfg.profile = profile;
    // Loss weights shared by both profiles; the surface-area weight uses the
    // open-surface value (raise it for closed or cluttered inputs).
    cfg.train.weights.lambda_gm = 0.06;
    cfg.train.weights.lambda_sp = 0.01;
    cfg.train.weights.lambda_ma = 0.08;
    cfg.train.weights.delta_eps = 0.01;
    if (profile == "full") {
        cfg.model.depth = 6;
        cfg.model.width = 512;
        cfg.model.skip_layer = 3;
        cfg.train.epochs = 60000;
        cfg.train.sampler.surface_batch = 20000;
        cfg.train.sampler.domain_batch = 20000;
        cfg.extraction.grid_n = 256;
    } else if (profile == "desk") {
        // Single-CPU-core sizing: smaller net, fewer epochs, coarser grid.
        cfg.model.depth = 4;
        cfg.model.width = 128;
        cfg.model.skip_layer = 3;
        cfg.train.epochs = 3000;
        cfg.train.sampler.surface_batch = 2048;
        cfg.train.sampler.domain_batch = 1024;
        cfg.extraction.grid_n = 64;
    } else {
        fail("unknown profile '" + profile + "' (expected full or desk)");
    }
    return cfg;
}

namespace {

int64_t parse_int(const std::string& key, const std::string& value) {
    char* end = nullptr;
    long long v = std::strtoll(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size())
        fail("invalid integer for '" + key + "': '" + value + "'");
    return v;
}

uint64_t parse_uint(const std::string& key, const std::string& value) {
    char* end = nullptr;
    if (!value.empty() && value[0] == '-')
        fail("'" + key + "' must be non-negative, got '" + value + "'");
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size())
        fail("invalid integer for '" + key + "': '" + value + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    double v = 0.0;
    if (!token_to_double(value, v))
        fail("invalid number for '" + key + "': '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "off" || value == "no") return false;
    fail("invalid boolean for '" + key + "': '" + value + "'");
}

// Applies one key to the config; returns false on an unknown key.
bool apply_key(RunConfig& c, const std::string& key, const std::string& value) {
    // Identity / plumbing
    if (key == "input") c.input = value;
    else if (key == "shape") c.shape = value;
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "normalize") c.normalize = value;
    else if (key == "seed") {
        c.seed = parse_uint(key, value);
        c.train.sampler.seed = c.seed;
        c.extraction.seed = c.seed;
    }
    // Network
    else if (key == "width") c.model.width = int(parse_int(key, value));
    else if (key == "depth") c.model.depth = int(parse_int(key, value));
    else if (key == "skip_layer") c.model.skip_layer = int(parse_int(key, value));
    else if (key == "softplus_beta") c.model.softplus_beta = parse_real(key, value);
    // Optimization
    else if (key == "epochs") c.train.epochs = int(parse_int(key, value));
    else if (key == "lr0") c.train.lr0 = parse_real(key, value);
    else if (key == "decay_factor") c.train.decay_factor = parse_real(key, value);
    else if (key == "decay_every") c.train.decay_every = int(parse_int(key, value));
    else if (key == "adam_beta1") c.train.adam_beta1 = parse_real(key, value);
    else if (key == "adam_beta2") c.train.adam_beta2 = parse_real(key, value);
    else if (key == "adam_eps") c.train.adam_eps = parse_real(key, value);
    else if (key == "surface_batch")
        c.train.sampler.surface_batch = int(parse_int(key, value));
    else if (key == "domain_batch")
        c.train.sampler.domain_batch = int(parse_int(key, value));
    else if (key == "chunk") c.train.chunk = size_t(parse_uint(key, value));
    else if (key == "guard_eps") c.train.guard_eps = parse_real(key, value);
    else if (key == "checkpoint_every") c.train.checkpoint_every = int(parse_int(key, value));
    else if (key == "progress_every") c.train.progress_every = int(parse_int(key, value));
    // Loss weights
    else if (key == "lambda_gm") c.train.weights.lambda_gm = parse_real(key, value);
    else if (key == "lambda_sp") c.train.weights.lambda_sp = parse_real(key, value);
    else if (key == "lambda_ma") c.train.weights.lambda_ma = parse_real(key, value);
    else if (key == "delta_eps") c.train.weights.delta_eps = parse_real(key, value);
    // Extraction
    else if (key == "grid_n") c.extraction.grid_n = int(parse_int(key, value));
    else if (key == "eta") c.extraction.eta = parse_real(key, value);
    else if (key == "samples_per_cell")
        c.extraction.samples_per_cell = int(parse_int(key, value));
    else if (key == "enlargement") c.extraction.enlargement = parse_real(key, value);
    else if (key == "smooth_iterations")
        c.extraction.smooth_iterations = int(parse_int(key, value));
    else if (key == "smooth_step") c.extraction.smooth_step = parse_real(key, value);
    else if (key == "filter_small_components")
        c.extraction.filter_small_components = parse_bool(key, value);
    else if (key == "min_component_area_fraction")
        c.extraction.min_component_area_fraction = parse_real(key, value);
    else return false;
    return true;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    struct Entry {
        size_t line;
        std::string key, value;
    };
    std::vector<Entry> entries;
    std::vector<std::string> lines = split_lines(text);
    for (size_t li = 0; li < lines.size(); ++li) {
        std::string line = lines[li];
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail("config line " + std::to_string(li + 1) + ": expected 'key = value'");
        Entry e;
        e.line = li + 1;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        if (e.key.empty())
            fail("config line " + std::to_string(li + 1) + ": empty key");
        entries.push_back(std::move(e));
    }

    // The profile preset is applied first so later keys override it, no
    // matter where the profile line sits in the file.
    std::string profile = "desk";
    for (const Entry& e : entries)
        if (e.key == "profile") profile = e.value;
    RunConfig cfg = default_run_config(profile);

    for (const Entry& e : entries) {
        if (e.key == "profile") continue;
        try {
            if (!apply_key(cfg, e.key, e.value))
                fail("unknown key '" + e.key + "'");
        } catch (const IoError& err) {
            fail("config line " + std::to_string(e.line) + ": " + err.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    try {
        return parse_run_config(read_file(path));
    } catch (const IoError& err) {
        fail(path + ": " + err.what());
    }
}

std::string format_run_config(const RunConfig& c) {
    std::string out;
    auto str = [&](const char* k, const std::string& v) {
        out += fmt("%s = %s\n", k, v.c_str());
    };
    auto num = [&](const char* k, double v) { out += fmt("%s = %.17g\n", k, v); };
    auto integer = [&](const char* k, long long v) { out += fmt("%s = %lld\n", k, v); };

    str("profile", c.profile);
    str("input", c.input);
    str("shape", c.shape);
    str("out_dir", c.out_dir);
    str("normalize", c.normalize);
    out += fmt("seed = %llu\n", static_cast<unsigned long long>(c.seed));
    integer("width", c.model.width);
    integer("depth", c.model.depth);
    integer("skip_layer", c.model.skip_layer);
    num("softplus_beta", c.model.softplus_beta);
    integer("epochs", c.train.epochs);
    num("lr0", c.train.lr0);
    num("decay_factor", c.train.decay_factor);
    integer("decay_every", c.train.decay_every);
    num("adam_beta1", c.train.adam_beta1);
    num("adam_beta2", c.train.adam_beta2);
    num("adam_eps", c.train.adam_eps);
    integer("surface_batch", (long long)c.train.sampler.surface_batch);
    integer("domain_batch", (long long)c.train.sampler.domain_batch);
    integer("chunk", (long long)c.train.chunk);
    num("guard_eps", c.train.guard_eps);
    integer("checkpoint_every", c.train.checkpoint_every);
    integer("progress_every", c.train.progress_every);
    num("lambda_gm", c.train.weights.lambda_gm);
    num("lambda_sp", c.train.weights.lambda_sp);
    num("lambda_ma", c.train.weights.lambda_ma);
    num("delta_eps", c.train.weights.delta_eps);
    integer("grid_n", c.extraction.grid_n);
    num("eta", c.extraction.eta);
    integer("samples_per_cell", c.extraction.samples_per_cell);
    num("enlargement", c.extraction.enlargement);
    integer("smooth_iterations", c.extraction.smooth_iterations);
    num("smooth_step", c.extraction.smooth_step);
    str("filter_small_components", c.extraction.filter_small_components ? "1" : "0");
    num("min_component_area_fraction", c.extraction.min_component_area_fraction);
    return out;
}

void write_manifest(const std::string& path, const RunConfig& config,
                    const std::string& command) {
    std::string out;
    out += fmt("# command: %s\n", command.c_str());
    out += fmt("# artifact: %s\n", kArtifactVersion);
    out += format_run_config(config);
    write_file(path, out);
}

}  // namespace nsp
