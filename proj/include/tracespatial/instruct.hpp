#pragma once

#include "tracespatial/refine.hpp"
#include "tracespatial/rng.hpp"
#include "tracespatial/scene.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tracespatial {

TRACESPATIAL_ERROR(TemplateError);

struct TemplatePool {
    std::vector<std::string> metric;
    std::vector<std::string> standard;
};

inline const std::map<std::string, TemplatePool>& instruction_templates()
{
    static const std::map<std::string, TemplatePool> pools = {
        {"method1_place_relative",
         {{"Move the {source_obj} to a position {distance:.3f}m to the {endpoint_direction} of the {reference_obj}.",
           "Pick up the {source_obj} and move it to a position {distance:.3f}m to the {endpoint_direction} of the "
           "{reference_obj}."},
          {"Place the {source_obj} to the {endpoint_direction} of the {reference_obj}.",
           "Pick up the {source_obj} on the {reference_obj}'s {endpoint_direction} side."}}},
        {"method2_directional_move",
         {{"Move the {source_obj} {distance:.3f}m in the {endpoint_direction} direction.",
           "Pick up the {source_obj} and move it {distance:.3f}m toward the {endpoint_direction}."},
          {"Push the {source_obj} toward the {endpoint_direction}.",
           "Slide the {source_obj} toward {endpoint_direction}."}}},
        {"method3_stacking",
         {{},
          {"Place the {source_obj} on top of the {reference_obj}.", "Stack the {source_obj} on the {reference_obj}.",
           "Put the {source_obj} above the {reference_obj}.", "Move the {source_obj} onto the {reference_obj}.",
           "Set the {source_obj} on the {reference_obj}."}}},
        {"method4_bypass_place",
         {{},
          {"Move the {source_obj} around the {via_obj} on its {via_direction} side, then place it to the "
           "{endpoint_direction} of the {reference_obj}.",
           "Pick up the {source_obj} around the {via_obj} from the {via_direction} side, then position it to the "
           "{endpoint_direction} of the {reference_obj}."}}},
        {"method5_bypass_stack",
         {{},
          {"Move the {source_obj} around the {via_obj} on its {via_direction} side, then place it on top of the "
           "{reference_obj}.",
           "Pick up the {source_obj} around the {via_obj} from the {via_direction} side, then place it on the "
           "{reference_obj}."}}},
        {"potential_via_enrichment",
         {{},
          {"Move the {source_obj} around the {via_obj} on its {via_direction} side, then {final_action}.",
           "Pick up the {source_obj}, passing to the {via_direction} of the {via_obj}, then {final_action}."}}},
    };
    return pools;
}

inline const std::vector<std::string>& prompts_2d()
{
    static const std::vector<std::string> p = {
        "Please predict 2D object-centric waypoints to complete the task successfully. The task is \"<instruction>\". "
        "Your answer should be formatted as a tuple, i.e. [(x, y)], where the tuple contains the x and y coordinates "
        "of a point satisfying the conditions above.",
        "Point the 2D object-centric waypoints for the task \"<instruction>\". Your answer should be formatted as a "
        "tuple, i.e. [(x, y)].",
        "You are currently a robot performing robotic manipulation tasks. The task instruction is: \"<instruction>\". "
        "Use 2D points to mark the manipulated object-centric waypoints...",
        "Please predict 2D object-centric visual trace to complete the task successfully. The task is "
        "\"<instruction>\". Your answer should be formatted as a tuple, i.e. [(x, y)].",
    };
    return p;
}

inline const std::vector<std::string>& prompts_3d()
{
    static const std::vector<std::string> p = {
        "Please predict 3D object-centric waypoints to complete the task successfully. The task is \"<instruction>\". "
        "Your answer should be formatted as a list of tuples, i.e., [(x1, y1, d1), (x2, y2, d2), ...], where each "
        "tuple contains the x and y coordinates and the depth of the point.",
        "Point the 3D object-centric visual trace for the task \"<instruction>\". Your answer should be formatted as "
        "a list of tuples, i.e., [(x1, y1, d1), ...].",
        "You are currently a robot performing robotic manipulation tasks. The task instruction is: \"<instruction>\". "
        "Use 3D points to mark the manipulated object-centric waypoints to guide the robot...",
    };
    return p;
}

inline const std::vector<std::string>& prompts_lift()
{
    static const std::vector<std::string> p = {
        "Please lift the 2D object-centric waypoints to 3D object-centric waypoints to complete the task "
        "successfully. The task is \"<instruction>\". The 2D waypoints is <trace>. Your answer should be formatted "
        "as a list of tuples, i.e., [(x1, y1, d1), ...].",
        "Lift the 2D object-centric visual trace to 3D object-centric visual trace for the task \"<instruction>\". "
        "The 2D visual trace is <trace>. Your answer should be formatted as a list of tuples, i.e., [(x1, y1, d1), "
        "...].",
        "Please lift the 2D object-centric visual trace to 3D object-centric visual trace to complete the task "
        "successfully. The task is \"<instruction>\". The 2D visual trace is <trace>. Your answer should be "
        "formatted as a list of tuples...",
    };
    return p;
}

/// Spatial-order caption templates keyed by sort direction.
inline const std::map<std::string, std::vector<std::string>>& spatial_order_templates()
{
    static const std::map<std::string, std::vector<std::string>> t = {
        {"left_to_right",
         {"{dense_caption}, which is the {ordinal} {class_name} from left to right",
          "{dense_caption}, marked as the {ordinal} {class_name} in a left-to-right arrangement"}},
        {"right_to_left",
         {"{dense_caption}, the {ordinal} {class_name} viewed from the right",
          "{dense_caption}, the {ordinal} {class_name} from the right"}},
        {"front_to_back",
         {"{dense_caption}, which appears as the {ordinal} {class_name} when viewed from the front",
          "{dense_caption}, positioned as the {ordinal} {class_name} in front-to-back order"}},
        {"back_to_front",
         {"{dense_caption}, which is counted as the {ordinal} {class_name}, starting from the back",
          "{dense_caption}, the {ordinal} {class_name} in the back-to-front sequence"}},
        {"top_to_bottom",
         {"{dense_caption}, the {ordinal} {class_name} viewed from the top",
          "{dense_caption}, placed as the {ordinal} {class_name} when sorted from top to bottom"}},
        {"bottom_to_top",
         {"{dense_caption}, which ranks as the {ordinal} {class_name} in bottom-to-top order",
          "{dense_caption}, arranged as the {ordinal} {class_name} when ordered from the bottom"}},
    };
    return t;
}

inline const char* template_key(Method m)
{
    switch (m) {
    case Method::PlaceRelative: return "method1_place_relative";
    case Method::DirectionalMove: return "method2_directional_move";
    case Method::Stacking: return "method3_stacking";
    case Method::BypassPlace: return "method4_bypass_place";
    case Method::BypassStack: return "method5_bypass_stack";
    }
    return "";
}

inline bool is_metric_capable(Method m) { return !instruction_templates().at(template_key(m)).metric.empty(); }

/// Placeholder values; unset fields raise TemplateError when a template needs them.
struct TemplateValues {
    std::optional<std::string> source_obj, reference_obj, via_obj, endpoint_direction, via_direction, final_action;
    std::optional<double> distance;
};

/// Substitute {name} and {distance:.3f} placeholders.
inline std::string fill_template(const std::string& tmpl, const TemplateValues& v)
{
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '{') {
            out.push_back(tmpl[i++]);
            continue;
        }
        const auto close = tmpl.find('}', i);
        if (close == std::string::npos) throw TemplateError("unterminated placeholder");
        const std::string name = tmpl.substr(i + 1, close - i - 1);
        const auto need = [&](const std::optional<std::string>& s) -> const std::string& {
            if (!s) throw TemplateError("missing value for {" + name + "}");
            return *s;
        };
        if (name == "distance:.3f") {
            if (!v.distance) throw TemplateError("missing value for {distance}");
            out += strformat("%.3f", *v.distance);
        } else if (name == "source_obj") {
            out += need(v.source_obj);
        } else if (name == "reference_obj") {
            out += need(v.reference_obj);
        } else if (name == "via_obj") {
            out += need(v.via_obj);
        } else if (name == "endpoint_direction") {
            out += need(v.endpoint_direction);
        } else if (name == "via_direction") {
            out += need(v.via_direction);
        } else if (name == "final_action") {
            out += need(v.final_action);
        } else {
            throw TemplateError("unknown placeholder {" + name + "}");
        }
        i = close + 1;
    }
    return out;
}

struct RenderedInstruction {
    std::string text;
    bool metric = false;
};

/// render_instruction. Metric-capable methods draw a metric template with
/// probability `metric_probability`; the template is then uniform within its
/// sub-pool.
inline RenderedInstruction render_instruction(Method method, const TemplateValues& values, Rng& rng,
                                              double metric_probability = 0.2)
{
    if (is_bypass(method) && !values.via_obj) throw TemplateError("bypass method without a via object");
    const auto& pool = instruction_templates().at(template_key(method));
    RenderedInstruction r;
    r.metric = !pool.metric.empty() && rng.bernoulli(metric_probability);
    const auto& sub = r.metric ? pool.metric : pool.standard;
    r.text = fill_template(sub[rng.index(sub.size())], values);
    return r;
}

/// Trailing clause used by via enrichment for a task that was not a bypass.
inline std::string final_action(Method method, const TemplateValues& v)
{
    switch (method) {
    case Method::PlaceRelative:
    case Method::BypassPlace:
        return fill_template("place it to the {endpoint_direction} of the {reference_obj}", v);
    case Method::DirectionalMove: return fill_template("move it toward the {endpoint_direction}", v);
    case Method::Stacking:
    case Method::BypassStack: return fill_template("place it on top of the {reference_obj}", v);
    }
    return "";
}

/// Retroactive enrichment: a discovered via object turned into an instruction.
inline std::string render_enrichment(Method method, TemplateValues values, Rng& rng)
{
    if (!values.via_obj || !values.via_direction) throw TemplateError("enrichment needs a via object and direction");
    values.final_action = final_action(method, values);
    const auto& pool = instruction_templates().at("potential_via_enrichment").standard;
    return fill_template(pool[rng.index(pool.size())], values);
}

// ---------------------------------------------------------------------------
// Measurements

enum class MeasureKind { Length, Width, Height };

inline const char* measure_kind_name(MeasureKind k)
{
    switch (k) {
    case MeasureKind::Length: return "length";
    case MeasureKind::Width: return "width";
    case MeasureKind::Height: return "height";
    }
    return "?";
}

/// One decimal, trailing zeros trimmed.
inline std::string format_measure_value(double v)
{
    std::string s = strformat("%.1f", v);
    if (s.size() > 2 && s.substr(s.size() - 2) == ".0") s.resize(s.size() - 2);
    return s;
}

struct HumanMeasure {
    std::string text;
    std::string unit;
    double value = 0.0;  // in `unit`
};

/// Cm (0.8) or inches below 1 m; meters (0.8) or feet
/// at or above.
inline HumanMeasure humanize_measure(double meters, const std::string& object_phrase, MeasureKind kind, Rng& rng)
{
    if (!(meters > 0.0)) throw InvalidInput("measurement must be positive");
    const bool preferred = rng.bernoulli(0.8);
    HumanMeasure h;
    if (meters < 1.0) {
        h.unit = preferred ? "centimeters" : "inches";
        h.value = preferred ? meters * 100.0 : meters / 0.0254;
    } else {
        h.unit = preferred ? "meters" : "feet";
        h.value = preferred ? meters : meters / 0.3048;
    }
    const std::string num = format_measure_value(h.value);
    std::string unit = h.unit;
    if (num == "1") unit = unit == "feet" ? "foot" : unit == "inches" ? "inch" : unit.substr(0, unit.size() - 1);
    h.text = "The " + std::string(measure_kind_name(kind)) + " of " + object_phrase + " is about " + num + " " + unit + ".";
    return h;
}

// ---------------------------------------------------------------------------
// Trace QA

enum class QaKind { TwoD, ThreeD, Lift };

inline const char* qa_kind_name(QaKind k)
{
    switch (k) {
    case QaKind::TwoD: return "2d";
    case QaKind::ThreeD: return "3d";
    case QaKind::Lift: return "lift";
    }
    return "?";
}

/// Pixel coordinate to the [0, 1000] grid, rounding half away from zero.
inline int normalize_coord(double pixel, int extent)
{
    const double g = std::round(kAnswerGrid * pixel / extent);
    return static_cast<int>(std::clamp(g, 0.0, kAnswerGrid));
}

inline double denormalize_coord(int grid, int extent) { return grid * static_cast<double>(extent) / kAnswerGrid; }

inline std::string format_points_2d(const std::vector<ImagePoint>& pts, int width, int height)
{
    std::string s = "[";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s += ", ";
        s += strformat("(%d, %d)", normalize_coord(pts[i].u, width), normalize_coord(pts[i].v, height));
    }
    return s + "]";
}

inline std::string format_points_3d(const std::vector<ImagePoint>& pts, int width, int height)
{
    std::string s = "[";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s += ", ";
        s += strformat("(%d, %d, %.3f)", normalize_coord(pts[i].u, width), normalize_coord(pts[i].v, height), pts[i].d);
    }
    return s + "]";
}

inline std::string replace_all(std::string s, const std::string& from, const std::string& to)
{
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
    return s;
}

struct QaPair {
    std::string prompt;
    std::string answer;
};

inline QaPair format_trace_qa(const Trace& trace, QaKind kind, const std::string& instruction,
                              const CameraModel& camera, Rng& rng)
{
    if (trace.image_points.size() > 8) throw InvalidInput("trace QA expects at most 8 keypoints");
    const auto& pool = kind == QaKind::TwoD ? prompts_2d() : kind == QaKind::ThreeD ? prompts_3d() : prompts_lift();
    QaPair qa;
    qa.prompt = replace_all(pool[rng.index(pool.size())], "<instruction>", instruction);
    const std::string two = format_points_2d(trace.image_points, camera.width, camera.height);
    const std::string three = format_points_3d(trace.image_points, camera.width, camera.height);
    switch (kind) {
    case QaKind::TwoD: qa.answer = two; break;
    case QaKind::ThreeD: qa.answer = three; break;
    case QaKind::Lift:
        qa.prompt = replace_all(qa.prompt, "<trace>", two);
        qa.answer = three;
        break;
    }
    return qa;
}

/// English ordinal word for small n ("first" ... "tenth"), else "11th" style.
inline std::string ordinal_word(int n)
{
    static const char* words[] = {"first", "second", "third", "fourth", "fifth",
                                  "sixth", "seventh", "eighth", "ninth", "tenth"};
    if (n >= 1 && n <= 10) return words[n - 1];
    const int mod100 = n % 100;
    const char* suffix = (mod100 >= 11 && mod100 <= 13) ? "th" : n % 10 == 1 ? "st" : n % 10 == 2 ? "nd" : n % 10 == 3 ? "rd" : "th";
    return std::to_string(n) + suffix;
}

/// Spatial-order caption for one of several same-category instances.
inline std::string spatial_order_caption(const std::string& order_key, const std::string& dense_caption, int ordinal,
                                         const std::string& class_name, Rng& rng)
{
    const auto it = spatial_order_templates().find(order_key);
    if (it == spatial_order_templates().end()) throw TemplateError("unknown sort order '" + order_key + "'");
    std::string s = it->second[rng.index(it->second.size())];
    s = replace_all(s, "{dense_caption}", dense_caption);
    s = replace_all(s, "{ordinal}", ordinal_word(ordinal));
    return replace_all(s, "{class_name}", class_name);
}

}  // namespace tracespatial
