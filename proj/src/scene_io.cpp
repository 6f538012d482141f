#include "gsedit/scene_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace gsedit {

namespace {

constexpr int kRestCoefficients = 45;  // degree-3 layout: 15 coefficients x 3 channels

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t offset = 0;
};

std::size_t type_size(const std::string& type) {
    static const std::map<std::string, std::size_t> sizes = {
        {"char", 1},  {"int8", 1},   {"uchar", 1},  {"uint8", 1},   {"short", 2},  {"int16", 2},
        {"ushort", 2}, {"uint16", 2}, {"int", 4},    {"int32", 4},   {"uint", 4},   {"uint32", 4},
        {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8},
    };
    const auto it = sizes.find(type);
    if (it == sizes.end()) fail(ErrorKind::Format, "unsupported PLY property type '" + type + "'");
    return it->second;
}

template <typename T>
T read_le(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

double read_property(const unsigned char* record, const PlyProperty& prop) {
    const unsigned char* p = record + prop.offset;
    const std::string& t = prop.type;
    if (t == "float" || t == "float32") return read_le<float>(p);
    if (t == "double" || t == "float64") return read_le<double>(p);
    if (t == "uchar" || t == "uint8") return read_le<std::uint8_t>(p);
    if (t == "char" || t == "int8") return read_le<std::int8_t>(p);
    if (t == "short" || t == "int16") return read_le<std::int16_t>(p);
    if (t == "ushort" || t == "uint16") return read_le<std::uint16_t>(p);
    if (t == "int" || t == "int32") return read_le<std::int32_t>(p);
    return read_le<std::uint32_t>(p);
}

}  // namespace

RawGaussian encode_raw(const Gaussian& g) {
    RawGaussian raw{};
    for (int k = 0; k < 3; ++k) {
        raw.position[k] = static_cast<float>(g.mean[k]);
        raw.f_dc[k] = static_cast<float>((g.color[k] - 0.5) / kShC0);
        raw.log_scale[k] = static_cast<float>(std::log(g.scale[k]));
    }
    const double alpha = std::clamp(g.opacity, 1e-12, 1.0 - 1e-12);
    raw.opacity_logit = static_cast<float>(std::log(alpha / (1.0 - alpha)));
    for (int k = 0; k < 4; ++k) raw.rotation[k] = static_cast<float>(g.rotation[k]);
    return raw;
}

Gaussian decode_raw(const RawGaussian& raw) {
    Gaussian g;
    for (int k = 0; k < 3; ++k) {
        g.mean[k] = raw.position[k];
        g.color[k] = std::clamp(0.5 + kShC0 * static_cast<double>(raw.f_dc[k]), 0.0, 1.0);
        g.scale[k] = std::exp(static_cast<double>(raw.log_scale[k]));
    }
    g.opacity = std::max(sigmoid(raw.opacity_logit), std::numeric_limits<double>::min());
    Quat q(raw.rotation[0], raw.rotation[1], raw.rotation[2], raw.rotation[3]);
    const double n = q.norm();
    // Stored quaternions that are unit to float precision are kept verbatim so
    // that decode/encode is a fixed point.
    if (n == 0.0)
        g.rotation = identity_quat();
    else
        g.rotation = std::abs(n - 1.0) <= 1e-6 ? q : Quat(q / n);
    return g;
}

GaussianCloud quantize_to_storage(const GaussianCloud& cloud) {
    GaussianCloud out = cloud;
    for (Gaussian& g : out.gaussians()) g = decode_raw(encode_raw(g));
    return out;
}

GaussianCloud load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Input, "cannot open PLY '" + path.string() + "'");

    std::string line;
    std::getline(in, line);
    if (line != "ply" && line != "ply\r") fail(ErrorKind::Format, "'" + path.string() + "' is not a PLY file");

    std::size_t vertex_count = 0;
    bool in_vertex = false;
    bool seen_vertex = false;
    std::vector<PlyProperty> props;
    std::size_t stride = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string format;
            ls >> format;
            if (format != "binary_little_endian")
                fail(ErrorKind::Format, "PLY format '" + format + "' not supported (need binary_little_endian)");
        } else if (word == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            if (seen_vertex && name != "vertex") {
                in_vertex = false;  // trailing elements are ignored
                continue;
            }
            if (name != "vertex") fail(ErrorKind::Format, "PLY must start with the vertex element");
            in_vertex = seen_vertex = true;
            vertex_count = count;
        } else if (word == "property") {
            if (!in_vertex) continue;
            std::string type, name;
            ls >> type;
            if (type == "list") fail(ErrorKind::Format, "list properties are not supported in the vertex element");
            ls >> name;
            props.push_back({name, type, stride});
            stride += type_size(type);
        } else if (word == "end_header") {
            break;
        }
    }
    if (!seen_vertex) fail(ErrorKind::Format, "PLY has no vertex element");

    auto find = [&](const std::string& name) -> const PlyProperty* {
        for (const auto& p : props)
            if (p.name == name) return &p;
        return nullptr;
    };
    auto need = [&](const std::string& name) -> const PlyProperty& {
        const PlyProperty* p = find(name);
        if (p == nullptr) fail(ErrorKind::Format, "PLY is missing field '" + name + "'");
        return *p;
    };
    const char* required[] = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                              "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};
    std::vector<const PlyProperty*> fields;
    for (const char* name : required) fields.push_back(&need(name));
    const PlyProperty* added_prop = find("edit_added");

    std::vector<unsigned char> record(stride);
    std::vector<Gaussian> gaussians;
    std::vector<bool> added;
    gaussians.reserve(vertex_count);
    added.reserve(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(stride));
        if (!in) fail(ErrorKind::Format, "PLY truncated at point " + std::to_string(i));
        double v[14];
        for (int k = 0; k < 14; ++k) {
            v[k] = read_property(record.data(), *fields[k]);
            if (!std::isfinite(v[k]))
                fail(ErrorKind::Data, "non-finite '" + fields[k]->name + "' at point " + std::to_string(i));
        }
        RawGaussian raw{};
        for (int k = 0; k < 3; ++k) {
            raw.position[k] = static_cast<float>(v[k]);
            raw.f_dc[k] = static_cast<float>(v[3 + k]);
            raw.log_scale[k] = static_cast<float>(v[7 + k]);
        }
        raw.opacity_logit = static_cast<float>(v[6]);
        for (int k = 0; k < 4; ++k) raw.rotation[k] = static_cast<float>(v[10 + k]);
        const Gaussian g = decode_raw(raw);
        if (!g.scale.allFinite() || (g.scale.array() <= 0.0).any())
            fail(ErrorKind::Data, "scale overflows at point " + std::to_string(i));
        gaussians.push_back(g);
        added.push_back(added_prop != nullptr && read_property(record.data(), *added_prop) != 0.0);
    }
    return GaussianCloud(std::move(gaussians), std::move(added));
}

void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Input, "cannot write PLY '" + path.string() + "'");
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"})
        out << "property float " << name << "\n";
    for (int k = 0; k < kRestCoefficients; ++k) out << "property float f_rest_" << k << "\n";
    for (const char* name : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
                             "edit_added"})
        out << "property float " << name << "\n";
    out << "end_header\n";

    std::vector<float> record;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const RawGaussian raw = encode_raw(cloud[i]);
        record.clear();
        record.insert(record.end(), raw.position, raw.position + 3);
        record.insert(record.end(), {0.0f, 0.0f, 0.0f});
        record.insert(record.end(), raw.f_dc, raw.f_dc + 3);
        record.insert(record.end(), kRestCoefficients, 0.0f);
        record.push_back(raw.opacity_logit);
        record.insert(record.end(), raw.log_scale, raw.log_scale + 3);
        record.insert(record.end(), raw.rotation, raw.rotation + 4);
        record.push_back(cloud.is_added(i) ? 1.0f : 0.0f);
        out.write(reinterpret_cast<const char*>(record.data()),
                  static_cast<std::streamsize>(record.size() * sizeof(float)));
    }
    if (!out) fail(ErrorKind::Input, "failed writing PLY '" + path.string() + "'");
}

std::vector<NamedCamera> load_camera_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Input, "cannot open camera manifest '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "camera manifest: " + std::string(e.what()));
    }
    if (!doc.contains("views") || !doc["views"].is_array())
        fail(ErrorKind::Format, "camera manifest needs a 'views' array");

    std::vector<NamedCamera> cameras;
    for (const auto& view : doc["views"]) {
        try {
            Intrinsics k{view.at("fx").get<double>(), view.at("fy").get<double>(), view.at("cx").get<double>(),
                         view.at("cy").get<double>()};
            const auto& c2w_values = view.at("c2w");
            if (!c2w_values.is_array() || c2w_values.size() != 16)
                fail(ErrorKind::Format, "c2w must hold 16 numbers");
            Mat4 c2w;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) c2w(r, c) = c2w_values[r * 4 + c].get<double>();
            cameras.push_back({view.value("name", std::to_string(cameras.size())),
                               Camera::from_camera_to_world(k, c2w, view.at("width").get<int>(),
                                                            view.at("height").get<int>())});
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Format, "camera manifest view " + std::to_string(cameras.size()) + ": " + e.what());
        }
    }
    return cameras;
}

void save_camera_manifest(const std::vector<NamedCamera>& cameras, const std::filesystem::path& path) {
    nlohmann::json views = nlohmann::json::array();
    for (const auto& [name, cam] : cameras) {
        const Mat4 c2w = cam.camera_to_world();
        std::vector<double> flat;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) flat.push_back(c2w(r, c));
        views.push_back({{"name", name},
                         {"fx", cam.intrinsics().fx},
                         {"fy", cam.intrinsics().fy},
                         {"cx", cam.intrinsics().cx},
                         {"cy", cam.intrinsics().cy},
                         {"width", cam.width()},
                         {"height", cam.height()},
                         {"c2w", flat}});
    }
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Input, "cannot write camera manifest '" + path.string() + "'");
    out << nlohmann::json{{"views", views}}.dump(2) << "\n";
}

std::vector<Camera> cameras_of(const std::vector<NamedCamera>& named) {
    std::vector<Camera> out;
    out.reserve(named.size());
    for (const auto& n : named) out.push_back(n.camera);
    return out;
}

}  // namespace gsedit
