#pragma once

#include "tracespatial/bench.hpp"
#include "tracespatial/calib.hpp"
#include "tracespatial/refine.hpp"
#include "tracespatial/reward.hpp"
#include "tracespatial/scene.hpp"

#include "json.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace tracespatial {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Depth PNG (16-bit grayscale, millimeters, 0 = invalid)

inline void write_depth_png(const std::string& path, const DepthMap& depth)
{
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw InvalidInput("cannot write '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw InvalidInput("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InvalidInput("libpng write failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(depth.width) * 2);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const double mm = std::round(depth.at(x, y) * 1000.0);
            const auto v = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
            row[2 * x] = static_cast<png_byte>(v >> 8);
            row[2 * x + 1] = static_cast<png_byte>(v & 0xFF);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline DepthMap read_depth_png(const std::string& path)
{
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) throw InvalidInput("cannot open depth '" + path + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidInput("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidInput("libpng read failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int bits = png_get_bit_depth(png, info);
    const int type = png_get_color_type(png, info);
    if (type != PNG_COLOR_TYPE_GRAY || bits != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidInput("depth '" + path + "' must be 16-bit grayscale");
    }
    DepthMap d(w, h);
    std::vector<png_byte> row(static_cast<std::size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) d.at(x, y) = ((row[2 * x] << 8) | row[2 * x + 1]) / 1000.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return d;
}

// ---------------------------------------------------------------------------
// Small JSON helpers

namespace io_detail {

inline Vec3 vec3(const json& j)
{
    if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Mat3 mat3(const json& j)
{
    if (!j.is_array() || j.size() != 9) throw InvalidInput("expected a row-major 3x3 (9 numbers)");
    std::vector<double> a(9);
    for (int i = 0; i < 9; ++i) a[i] = j[i].get<double>();
    return mat3_from_row_major(a);
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const Mat3& m)
{
    const auto a = mat3_to_row_major(m);
    return json(std::vector<double>(a.begin(), a.end()));
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidInput("'" + path + "': " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    out << text;
}

inline std::string resolve(const fs::path& base, const std::string& rel)
{
    const fs::path p(rel);
    return p.is_absolute() ? p.string() : (base / p).string();
}

}  // namespace io_detail

inline json mask_to_json(const RleMask& m)
{
    return {{"size", {m.height(), m.width()}}, {"counts", m.counts()}, {"order", "row-major"}};
}

inline RleMask mask_from_json(const json& j)
{
    const auto& size = j.at("size");
    if (j.contains("order") && j["order"] != "row-major") throw InvalidInput("only row-major RLE is supported");
    return RleMask(size.at(0).get<int>(), size.at(1).get<int>(), j.at("counts").get<std::vector<std::uint32_t>>());
}

inline json box_to_json(const OrientedBox3& b)
{
    return {{"center", io_detail::to_json(b.center)},
            {"half_extents", io_detail::to_json(b.half_extents)},
            {"rotation", io_detail::to_json(b.rotation)}};
}

inline OrientedBox3 box_from_json(const json& j)
{
    OrientedBox3 b;
    b.center = io_detail::vec3(j.at("center"));
    b.half_extents = io_detail::vec3(j.at("half_extents"));
    b.rotation = j.contains("rotation") ? io_detail::mat3(j["rotation"]) : Mat3::Identity();
    b.validate();
    return b;
}

inline json camera_to_json(const CameraModel& c)
{
    return {{"fx", c.fx},
            {"fy", c.fy},
            {"cx", c.cx},
            {"cy", c.cy},
            {"width", c.width},
            {"height", c.height},
            {"rotation", io_detail::to_json(c.rotation)},
            {"translation", io_detail::to_json(c.translation)}};
}

inline CameraModel camera_from_json(const json& j)
{
    CameraModel c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.rotation = j.contains("rotation") ? io_detail::mat3(j["rotation"]) : Mat3::Identity();
    c.translation = j.contains("translation") ? io_detail::vec3(j["translation"]) : Vec3::Zero();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Scene

inline json scene_to_json(const Scene& s, const std::string& depth_file)
{
    json objs = json::array();
    for (const auto& o : s.objects) {
        json jo = {{"id", o.id},
                   {"category", o.category},
                   {"dense_caption", o.dense_caption},
                   {"spatial_caption", o.spatial_caption},
                   {"center", io_detail::to_json(o.box.center)},
                   {"half_extents", io_detail::to_json(o.box.half_extents)},
                   {"rotation", io_detail::to_json(o.box.rotation)},
                   {"is_high_quality", o.is_high_quality},
                   {"movable", o.movable}};
        if (o.mask) jo["mask_rle"] = mask_to_json(*o.mask);
        objs.push_back(jo);
    }
    return {{"camera", camera_to_json(s.camera)},
            {"gravity_rotation", io_detail::to_json(s.gravity_rotation)},
            {"depth_file", depth_file},
            {"objects", objs}};
}

/// Parse a scene; `base_dir` resolves a relative depth_file.
inline Scene scene_from_json(const json& j, const fs::path& base_dir)
{
    try {
        Scene s;
        s.camera = camera_from_json(j.at("camera"));
        s.gravity_rotation = j.contains("gravity_rotation") ? io_detail::mat3(j["gravity_rotation"]) : Mat3::Identity();
        if (j.contains("depth_file"))
            s.depth = read_depth_png(io_detail::resolve(base_dir, j["depth_file"].get<std::string>()));
        else
            s.depth = DepthMap(s.camera.width, s.camera.height, 0.0);
        for (const auto& jo : j.at("objects")) {
            ObjectInstance o;
            o.id = jo.at("id").get<std::string>();
            o.category = jo.value("category", "");
            o.dense_caption = jo.value("dense_caption", "");
            o.spatial_caption = jo.value("spatial_caption", "");
            o.box.center = io_detail::vec3(jo.at("center"));
            o.box.half_extents = io_detail::vec3(jo.at("half_extents"));
            o.box.rotation = jo.contains("rotation") ? io_detail::mat3(jo["rotation"]) : Mat3::Identity();
            if (jo.contains("mask_rle") && !jo["mask_rle"].is_null()) o.mask = mask_from_json(jo["mask_rle"]);
            o.is_high_quality = jo.value("is_high_quality", false);
            o.movable = jo.value("movable", false);
            if (jo.contains("front_axis")) o.front_axis = parse_local_axis(jo["front_axis"].get<std::string>());
            s.objects.push_back(std::move(o));
        }
        if (!s.gravity_rotation.isIdentity(1e-12)) s = align_to_gravity(std::move(s));
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("scene: ") + e.what());
    }
}

inline Scene load_scene(const std::string& path)
{
    return scene_from_json(io_detail::read_json_file(path), fs::path(path).parent_path());
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>_depth.png`.
inline void save_scene(const Scene& s, const fs::path& dir, const std::string& stem)
{
    fs::create_directories(dir);
    const std::string depth_name = stem + "_depth.png";
    write_depth_png((dir / depth_name).string(), s.depth);
    io_detail::write_text((dir / (stem + ".json")).string(), scene_to_json(s, depth_name).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Tasks

inline json task_to_json(const TaskSpec& t)
{
    json j = {{"method", method_name(t.method)}, {"source_id", t.source_id}};
    if (t.reference_id) j["reference_id"] = *t.reference_id;
    if (t.via_id) j["via_id"] = *t.via_id;
    if (t.direction) j["direction"] = direction_label(*t.direction);
    if (t.distance) j["distance"] = *t.distance;
    return j;
}

inline TaskSpec task_from_json(const json& j)
{
    try {
        TaskSpec t;
        const auto& m = j.at("method");
        t.method = parse_method(m.is_number() ? std::to_string(m.get<int>()) : m.get<std::string>());
        t.source_id = j.at("source_id").get<std::string>();
        if (j.contains("reference_id") && !j["reference_id"].is_null()) t.reference_id = j["reference_id"].get<std::string>();
        if (j.contains("via_id") && !j["via_id"].is_null()) t.via_id = j["via_id"].get<std::string>();
        if (j.contains("direction") && !j["direction"].is_null()) t.direction = parse_direction(j["direction"].get<std::string>());
        if (j.contains("distance") && !j["distance"].is_null()) t.distance = j["distance"].get<double>();
        return t;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("task: ") + e.what());
    }
}

inline std::vector<TaskSpec> load_tasks(const std::string& path)
{
    const json j = io_detail::read_json_file(path);
    const json& list = j.is_object() ? j.at("tasks") : j;
    std::vector<TaskSpec> out;
    for (const auto& t : list) out.push_back(task_from_json(t));
    return out;
}

// ---------------------------------------------------------------------------
// Traces

inline json trace_points_json(const Trace& t)
{
    json pts = json::array();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto& ip = t.image_points[i];
        const auto& w = t.world_points[i];
        pts.push_back({{"u", ip.u}, {"v", ip.v}, {"d", ip.d}, {"x", w.x()}, {"y", w.y()}, {"z", w.z()}});
    }
    return pts;
}

inline Trace trace_from_points_json(const json& pts, const CameraModel& camera, TraceFrame frame)
{
    std::vector<ImagePoint> img;
    Path world;
    bool has_world = true;
    for (const auto& p : pts) {
        img.push_back({p.at("u").get<double>(), p.at("v").get<double>(), p.at("d").get<double>()});
        if (p.contains("x") && p.contains("y") && p.contains("z"))
            world.emplace_back(p["x"].get<double>(), p["y"].get<double>(), p["z"].get<double>());
        else
            has_world = false;
    }
    Trace t = Trace::from_image(img, camera, frame);
    if (has_world) t.world_points = world;
    return t;
}

// ---------------------------------------------------------------------------
// Bench directories: one folder per sample

inline void save_bench_sample(const BenchSample& s, const fs::path& root)
{
    const fs::path dir = root / s.id;
    fs::create_directories(dir);
    write_depth_png((dir / "depth.png").string(), s.scene.depth);
    io_detail::write_text((dir / "scene.json").string(), scene_to_json(s.scene, "depth.png").dump(1) + "\n");
    json j = {{"id", s.id},
              {"start_mask", mask_to_json(s.start_mask)},
              {"end_box", box_to_json(s.end_box)},
              {"reference_trace", {{"points", trace_points_json(s.reference_trace)}}},
              {"prompt", s.prompt},
              {"step_count", s.step_count},
              {"category", task_category_name(s.category)}};
    if (s.source_box) j["source_box"] = box_to_json(*s.source_box);
    io_detail::write_text((dir / "sample.json").string(), j.dump(1) + "\n");
}

inline BenchSample load_bench_sample(const fs::path& dir)
{
    try {
        BenchSample s;
        s.scene = load_scene((dir / "scene.json").string());
        const json j = io_detail::read_json_file((dir / "sample.json").string());
        s.id = j.value("id", dir.filename().string());
        s.start_mask = mask_from_json(j.at("start_mask"));
        if (s.start_mask.empty()) throw InvalidInput("sample '" + s.id + "': empty start mask");
        s.end_box = box_from_json(j.at("end_box"));
        s.reference_trace = trace_from_points_json(j.at("reference_trace").at("points"), s.scene.camera, TraceFrame::ObjectCentric);
        s.prompt = j.value("prompt", "");
        s.step_count = j.value("step_count", static_cast<int>(s.reference_trace.size()));
        s.category = parse_task_category(j.value("category", "pick-place"));
        if (j.contains("source_box")) s.source_box = box_from_json(j["source_box"]);
        return s;
    } catch (const json::exception& e) {
        throw InvalidInput("bench sample '" + dir.string() + "': " + e.what());
    }
}

/// Sample folders in lexicographic order.
inline std::vector<BenchSample> load_bench(const fs::path& root)
{
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "sample.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<BenchSample> out;
    for (const auto& d : dirs) out.push_back(load_bench_sample(d));
    return out;
}

/// Prediction record: {"id", "answer": "[(u, v, d), ...]"} on the [0, 1000]
/// grid, or {"id", "points": [{u, v, d}]} in pixels.
inline std::optional<Trace> prediction_from_json(const json& j, const CameraModel& camera)
{
    try {
        if (j.contains("answer") && j["answer"].is_string()) {
            const std::string a = j["answer"].get<std::string>();
            const auto inner = detail::block(a, "answer");
            return trace_from_answer(inner ? *inner : a, camera);
        }
        if (j.contains("points")) {
            std::vector<ImagePoint> img;
            for (const auto& p : j["points"]) {
                ImagePoint ip{p.at("u").get<double>(), p.at("v").get<double>(), p.at("d").get<double>()};
                if (!std::isfinite(ip.u) || !std::isfinite(ip.v) || !(ip.d > 0.0)) return std::nullopt;
                img.push_back(ip);
            }
            if (img.empty()) return std::nullopt;
            return Trace::from_image(img, camera);
        }
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reward inputs

inline KeyStepAnnotations annotations_from_json(const json& j)
{
    KeyStepAnnotations a;
    if (j.contains("image_width")) a.image_width = j["image_width"].get<int>();
    if (j.contains("image_height")) a.image_height = j["image_height"].get<int>();
    if (j.contains("image_longer_side") && a.image_width == 0 && a.image_height == 0)
        a.image_width = a.image_height = j["image_longer_side"].get<int>();
    a.scene_max_depth = j.value("scene_max_depth", 0.0);
    const json& entries = j.contains("entries") ? j["entries"] : j.value("key_steps", json::array());
    for (const auto& e : entries) {
        KeyStep k;
        const auto type = parse_perception_type(e.at("type").get<std::string>());
        if (!type) throw InvalidInput("unknown perception type");
        k.type = *type;
        k.phrase = e.at("object").get<std::string>();
        const auto& v = e.at("value");
        if (k.type == PerceptionType::Referring) {
            if (!v.is_array() || v.size() != 3) throw InvalidInput("referring value must be [u, v, d]");
            k.pixel_point = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
        } else {
            k.scalar = v.get<double>();
        }
        a.entries.push_back(k);
    }
    return a;
}

inline AnswerTrace answer_trace_from_json(const json& j)
{
    if (j.is_string()) {
        const auto t = parse_point_list(j.get<std::string>());
        if (!t) throw InvalidInput("unparseable gt_trace");
        return *t;
    }
    AnswerTrace t;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 3) throw InvalidInput("gt_trace points must be [u, v, d]");
        t.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    return t;
}

inline json reward_to_json(const RewardBundle& b)
{
    return {{"r_of", b.r_of}, {"r_p", b.r_p},   {"r_t", b.r_t},        {"r_pf", b.r_pf},
            {"r_acc", b.r_acc}, {"total", b.total}, {"alpha", b.alpha}};
}

// ---------------------------------------------------------------------------
// Episodes

inline EefPose pose_from_json(const json& j, int frame)
{
    EefPose p;
    p.frame = frame;
    p.rotation = io_detail::mat3(j.at("rotation"));
    if (!is_rotation(p.rotation, 1e-6)) throw InvalidInput("eef rotation is not orthonormal");
    p.position = io_detail::vec3(j.at("position"));
    p.gripper_closed = j.value("closed", false);
    return p;
}

inline Episode episode_from_json(const json& j, const fs::path& base_dir)
{
    try {
        Episode ep;
        if (j.contains("camera")) ep.camera = camera_from_json(j["camera"]);
        ep.instruction = j.value("instruction", "");
        int idx = 0;
        for (const auto& jf : j.at("frames")) {
            EpisodeFrame f;
            if (jf.contains("camera")) f.camera = camera_from_json(jf["camera"]);
            if (jf.contains("depth_file")) f.depth = read_depth_png(io_detail::resolve(base_dir, jf["depth_file"].get<std::string>()));
            if (jf.contains("arms"))
                for (const auto& [name, arm] : jf["arms"].items()) f.arms[name] = pose_from_json(arm, idx);
            ep.frames.push_back(std::move(f));
            ++idx;
        }
        if (ep.frames.empty()) throw InvalidInput("episode has no frames");
        return ep;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("episode: ") + e.what());
    }
}

inline Episode load_episode(const std::string& path)
{
    return episode_from_json(io_detail::read_json_file(path), fs::path(path).parent_path());
}

inline void save_episode(const Episode& ep, const fs::path& dir, const std::string& stem)
{
    fs::create_directories(dir);
    json frames = json::array();
    for (std::size_t i = 0; i < ep.frames.size(); ++i) {
        const auto& f = ep.frames[i];
        json jf;
        const std::string depth_name = strformat("%s_depth_%04zu.png", stem.c_str(), i);
        write_depth_png((dir / depth_name).string(), f.depth);
        jf["depth_file"] = depth_name;
        if (f.camera) jf["camera"] = camera_to_json(*f.camera);
        json arms = json::object();
        for (const auto& [name, p] : f.arms)
            arms[name] = {{"rotation", io_detail::to_json(p.rotation)},
                          {"position", io_detail::to_json(p.position)},
                          {"closed", p.gripper_closed}};
        jf["arms"] = arms;
        frames.push_back(jf);
    }
    json j = {{"frames", frames}, {"instruction", ep.instruction}};
    if (ep.camera) j["camera"] = camera_to_json(*ep.camera);
    io_detail::write_text((dir / (stem + ".json")).string(), j.dump(1) + "\n");
}

}  // namespace tracespatial
