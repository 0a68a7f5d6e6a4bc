#pragma once

#include "tracespatial/geometry.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <variant>
#include <vector>

namespace tracespatial {

TRACESPATIAL_ERROR(InvalidGroup);
TRACESPATIAL_ERROR(InvalidScale);

inline constexpr double kProcessAlpha = 0.25;
inline constexpr double kAnswerGrid = 1000.0;

/// (u, v, d) with u, v on the [0, 1000] grid and d in meters, as written in
/// answers and referring steps.
using AnswerPoint = std::array<double, 3>;
using AnswerTrace = std::vector<AnswerPoint>;

enum class PerceptionType { Referring, Measuring, Scale };

inline const char* perception_type_name(PerceptionType t)
{
    switch (t) {
    case PerceptionType::Referring: return "Referring";
    case PerceptionType::Measuring: return "Measuring";
    case PerceptionType::Scale: return "Scale";
    }
    return "?";
}

inline std::optional<PerceptionType> parse_perception_type(const std::string& s)
{
    if (s == "Referring") return PerceptionType::Referring;
    if (s == "Measuring") return PerceptionType::Measuring;
    if (s == "Scale") return PerceptionType::Scale;
    return std::nullopt;
}

struct ProcessStep {
    PerceptionType type = PerceptionType::Referring;
    std::string target;
    AnswerPoint point{};  // Referring
    double scalar = 0.0;  // Measuring (meters after conversion) or Scale
};

struct Rollout {
    std::string text;
    std::optional<AnswerTrace> parsed_answer;
    std::vector<ProcessStep> parsed_steps;
};

struct KeyStep {
    PerceptionType type = PerceptionType::Referring;
    std::string phrase;
    AnswerPoint pixel_point{};  // Referring: (u px, v px, d m)
    double scalar = 0.0;        // Measuring: meters; Scale: ratio
};

struct KeyStepAnnotations {
    std::vector<KeyStep> entries;
    int image_width = 0;
    int image_height = 0;
    double scene_max_depth = 0.0;

    int longer_side() const { return std::max(image_width, image_height); }
};

struct RewardBundle {
    double r_of = 0.0;
    double r_p = 0.0;
    double r_t = 0.0;
    double r_pf = 0.0;
    double r_acc = 0.0;
    double total = 0.0;
    double alpha = kProcessAlpha;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline const std::string kNum = R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";

inline std::size_t count_of(const std::string& s, const std::string& needle)
{
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
    return n;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::optional<std::string> block(const std::string& text, const std::string& tag)
{
    const std::string open = "<" + tag + ">", close = "</" + tag + ">";
    const auto a = text.find(open);
    if (a == std::string::npos) return std::nullopt;
    const auto b = text.find(close, a + open.size());
    if (b == std::string::npos) return std::nullopt;
    return text.substr(a + open.size(), b - a - open.size());
}

inline std::optional<double> to_double(const std::string& s)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace detail

/// Meters per unit; accepts singular, plural and abbreviation.
inline std::optional<double> unit_to_meters(std::string unit)
{
    std::transform(unit.begin(), unit.end(), unit.begin(), [](unsigned char c) { return std::tolower(c); });
    if (unit == "m" || unit == "meter" || unit == "meters" || unit == "metre" || unit == "metres") return 1.0;
    if (unit == "cm" || unit == "centimeter" || unit == "centimeters" || unit == "centimetre" || unit == "centimetres")
        return 0.01;
    if (unit == "mm" || unit == "millimeter" || unit == "millimeters" || unit == "millimetre" || unit == "millimetres")
        return 0.001;
    if (unit == "in" || unit == "inch" || unit == "inches") return 0.0254;
    if (unit == "ft" || unit == "foot" || unit == "feet") return 0.3048;
    return std::nullopt;
}

/// Parses "[(u, v, d), ...]". Grid coordinates must lie in [0, 1000]; depth
/// must be positive.
inline std::optional<AnswerTrace> parse_point_list(const std::string& s)
{
    static const std::regex tuple_re("\\(\\s*(" + detail::kNum + ")\\s*,\\s*(" + detail::kNum + ")\\s*,\\s*(" +
                                     detail::kNum + ")\\s*\\)");
    static const std::regex sep_re(R"(^\s*,?\s*$)");
    const auto open = s.find('[');
    if (open == std::string::npos) return std::nullopt;
    const auto close = s.find(']', open);
    if (close == std::string::npos) return std::nullopt;
    const std::string body = s.substr(open + 1, close - open - 1);
    AnswerTrace out;
    std::size_t cursor = 0;
    for (std::sregex_iterator it(body.begin(), body.end(), tuple_re), end; it != end; ++it) {
        const std::string gap = body.substr(cursor, static_cast<std::size_t>(it->position()) - cursor);
        if (!std::regex_match(gap, sep_re) || (out.empty() && gap.find(',') != std::string::npos)) return std::nullopt;
        AnswerPoint p{};
        for (int k = 0; k < 3; ++k) {
            const auto v = detail::to_double((*it)[k + 1].str());
            if (!v) return std::nullopt;
            p[k] = *v;
        }
        if (p[0] < 0 || p[0] > kAnswerGrid || p[1] < 0 || p[1] > kAnswerGrid || !(p[2] > 0)) return std::nullopt;
        out.push_back(p);
        cursor = static_cast<std::size_t>(it->position() + it->length());
    }
    if (out.empty() || !detail::trim(body.substr(cursor)).empty()) return std::nullopt;
    return out;
}

/// First bracketed point list inside the answer block.
inline std::optional<AnswerTrace> parse_answer(const std::string& text)
{
    const auto ans = detail::block(text, "answer");
    if (!ans) return std::nullopt;
    return parse_point_list(*ans);
}

/// One "[Type] [Target]: value" line.
inline std::optional<ProcessStep> parse_step(const std::string& line)
{
    static const std::regex step_re(R"(^\s*\[([^\]]*)\]\s*\[([^\]]+)\]\s*:\s*(.*?)\s*$)");
    static const std::regex measure_re("^(" + detail::kNum + R"()\s*([A-Za-z]+)$)");
    static const std::regex scalar_re("^(" + detail::kNum + ")$");
    std::smatch m;
    if (!std::regex_match(line, m, step_re)) return std::nullopt;
    const auto type = parse_perception_type(detail::trim(m[1].str()));
    if (!type) return std::nullopt;
    ProcessStep step;
    step.type = *type;
    step.target = detail::trim(m[2].str());
    const std::string value = m[3].str();
    std::smatch vm;
    switch (*type) {
    case PerceptionType::Referring: {
        const auto pts = parse_point_list(value);
        if (!pts || pts->size() != 1 || detail::trim(value).front() != '[' || detail::trim(value).back() != ']')
            return std::nullopt;
        step.point = pts->front();
        break;
    }
    case PerceptionType::Measuring: {
        if (!std::regex_match(value, vm, measure_re)) return std::nullopt;
        const auto v = detail::to_double(vm[1].str());
        const auto f = unit_to_meters(vm[2].str());
        if (!v || !f) return std::nullopt;
        step.scalar = *v * *f;
        break;
    }
    case PerceptionType::Scale: {
        if (!std::regex_match(value, vm, scalar_re)) return std::nullopt;
        const auto v = detail::to_double(vm[1].str());
        if (!v) return std::nullopt;
        step.scalar = *v;
        break;
    }
    }
    return step;
}

struct StepParse {
    std::vector<ProcessStep> steps;
    std::size_t step_lines = 0;
    std::size_t malformed = 0;
};

/// Lines of the think block beginning with "[".
inline StepParse parse_steps(const std::string& text)
{
    StepParse out;
    const auto think = detail::block(text, "think");
    if (!think) return out;
    std::size_t start = 0;
    while (start <= think->size()) {
        auto end = think->find('\n', start);
        if (end == std::string::npos) end = think->size();
        const std::string line = detail::trim(think->substr(start, end - start));
        if (!line.empty() && line.front() == '[') {
            ++out.step_lines;
            if (auto s = parse_step(line))
                out.steps.push_back(*s);
            else
                ++out.malformed;
        }
        start = end + 1;
    }
    return out;
}

inline Rollout parse_rollout(const std::string& text)
{
    Rollout r;
    r.text = text;
    r.parsed_answer = parse_answer(text);
    r.parsed_steps = parse_steps(text).steps;
    return r;
}

// ---------------------------------------------------------------------------
// Rewards

/// Exactly one think block, then exactly one answer
/// block, only whitespace around them.
inline double outcome_format_reward(const std::string& text)
{
    using detail::count_of;
    if (count_of(text, "<think>") != 1 || count_of(text, "</think>") != 1 || count_of(text, "<answer>") != 1 ||
        count_of(text, "</answer>") != 1)
        return 0.0;
    static const std::regex re(R"(^\s*<think>[\s\S]*</think>\s*<answer>[\s\S]*</answer>\s*$)");
    return std::regex_match(text, re) ? 1.0 : 0.0;
}

/// Grid coordinates / 1000, depth / max depth.
inline Path normalize_answer(const AnswerTrace& t, double max_depth)
{
    if (!(max_depth > 0.0)) throw InvalidInput("scene max depth must be positive");
    Path out;
    out.reserve(t.size());
    for (const auto& p : t) out.emplace_back(p[0] / kAnswerGrid, p[1] / kAnswerGrid, p[2] / max_depth);
    return out;
}

/// point_reward on normalized traces.
inline double point_reward(const Path& pred, const Path& gt)
{
    if (pred.empty() || gt.empty()) return 0.0;
    const auto f = [](const Vec3& a, const Vec3& b) { return std::max(0.0, 1.0 - (a - b).squaredNorm()); };
    return 0.5 * (f(gt.front(), pred.front()) + f(gt.back(), pred.back()));
}

struct DtwResult {
    double cost = 0.0;          // summed local cost along the optimal path
    std::size_t path_length = 0;
    double mean() const { return path_length ? cost / static_cast<double>(path_length) : 0.0; }
};

/// DTW with Euclidean local cost. Among minimum-cost warping paths the
/// shortest is taken.
inline DtwResult dtw(const Path& a, const Path& b)
{
    if (a.empty() || b.empty()) throw InvalidInput("DTW needs non-empty sequences");
    const std::size_t n = a.size(), m = b.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost((n + 1) * (m + 1), inf);
    std::vector<std::size_t> len((n + 1) * (m + 1), 0);
    const auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    cost[at(0, 0)] = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            const std::array<std::size_t, 3> prev{at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)};
            std::size_t best = prev[0];
            for (std::size_t k = 1; k < 3; ++k) {
                const std::size_t c = prev[k];
                if (cost[c] < cost[best] || (cost[c] == cost[best] && len[c] < len[best])) best = c;
            }
            cost[at(i, j)] = cost[best] + (a[i - 1] - b[j - 1]).norm();
            len[at(i, j)] = len[best] + 1;
        }
    return {cost[at(n, m)], len[at(n, m)]};
}

/// Max(0, 1 - mean per-step DTW cost).
inline double trace_reward(const Path& pred, const Path& gt)
{
    if (pred.empty() || gt.empty()) return 0.0;
    return std::max(0.0, 1.0 - dtw(pred, gt).mean());
}

/// Binary, every step line must parse and at
/// least one must exist.
inline double process_format_reward(const std::string& text)
{
    if (!detail::block(text, "think")) return 0.0;
    const auto p = parse_steps(text);
    return p.step_lines > 0 && p.malformed == 0 ? 1.0 : 0.0;
}

/// Lowercase, articles removed, whitespace collapsed.
inline std::string canonical_phrase(const std::string& s)
{
    std::string lower;
    for (unsigned char c : s) lower.push_back(static_cast<char>(std::isalnum(c) ? std::tolower(c) : ' '));
    std::string out;
    std::size_t i = 0;
    while (i < lower.size()) {
        while (i < lower.size() && lower[i] == ' ') ++i;
        std::size_t j = i;
        while (j < lower.size() && lower[j] != ' ') ++j;
        const std::string w = lower.substr(i, j - i);
        if (!w.empty() && w != "the" && w != "a" && w != "an") {
            if (!out.empty()) out.push_back(' ');
            out += w;
        }
        i = j;
    }
    return out;
}

inline bool phrases_match(const std::string& target, const std::string& phrase)
{
    const std::string a = canonical_phrase(target), b = canonical_phrase(phrase);
    if (a.empty() || b.empty()) return false;
    return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

inline bool within_relative(double pred, double gt, double tol = 0.30)
{
    if (gt == 0.0) return pred == 0.0;
    return std::abs(pred - gt) / std::abs(gt) <= tol + 1e-12;
}

/// Credit of one step against one annotation (types assumed equal).
inline double step_credit(const ProcessStep& s, const KeyStep& k, const KeyStepAnnotations& ann)
{
    switch (k.type) {
    case PerceptionType::Referring: {
        const double su = ann.image_width > 0 ? ann.image_width / kAnswerGrid : 1.0;
        const double sv = ann.image_height > 0 ? ann.image_height / kAnswerGrid : 1.0;
        const double l1 = std::abs(s.point[0] * su - k.pixel_point[0]) + std::abs(s.point[1] * sv - k.pixel_point[1]);
        double credit = 0.0;
        if (l1 <= 0.10 * ann.longer_side() + 1e-9) credit += 0.5;
        if (within_relative(s.point[2], k.pixel_point[2])) credit += 0.5;
        return credit;
    }
    case PerceptionType::Measuring:
    case PerceptionType::Scale: return within_relative(s.scalar, k.scalar) ? 1.0 : 0.0;
    }
    return 0.0;
}

/// Mean over annotated key steps of the best
/// matching step's credit.
inline double process_accuracy_reward(const std::vector<ProcessStep>& steps, const KeyStepAnnotations& ann)
{
    if (ann.entries.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& k : ann.entries) {
        double best = 0.0;
        for (const auto& s : steps)
            if (s.type == k.type && phrases_match(s.target, k.phrase)) best = std::max(best, step_credit(s, k, ann));
        sum += best;
    }
    return sum / static_cast<double>(ann.entries.size());
}

/// total_reward = R_OF + R_P + R_T + alpha (R_PF + R_Acc).
inline double total_reward(double r_of, double r_p, double r_t, double r_pf, double r_acc, double alpha = kProcessAlpha)
{
    return r_of + r_p + r_t + alpha * (r_pf + r_acc);
}

inline void finalize(RewardBundle& b) { b.total = total_reward(b.r_of, b.r_p, b.r_t, b.r_pf, b.r_acc, b.alpha); }

/// Top-level scoring. Never throws: anything unparseable scores 0.
inline RewardBundle score_rollout(const std::string& text, const AnswerTrace& gt_trace,
                                  const KeyStepAnnotations& ann) noexcept
{
    RewardBundle b;
    try {
        b.r_of = outcome_format_reward(text);
        b.r_pf = process_format_reward(text);
        const auto steps = parse_steps(text);
        b.r_acc = process_accuracy_reward(steps.steps, ann);
        const auto pred = parse_answer(text);
        if (pred && !gt_trace.empty() && ann.scene_max_depth > 0.0) {
            const Path p = normalize_answer(*pred, ann.scene_max_depth);
            const Path g = normalize_answer(gt_trace, ann.scene_max_depth);
            b.r_p = point_reward(p, g);
            b.r_t = trace_reward(p, g);
        }
    } catch (...) {
        b = RewardBundle{};
    }
    finalize(b);
    return b;
}

/// Population standard score within the group.
inline std::vector<double> group_advantages(const std::vector<double>& rewards)
{
    if (rewards.size() < 2) throw InvalidGroup("a group needs at least 2 rewards");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> out(rewards.size(), 0.0);
    if (sd < 1e-12) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

/// scale_regression_loss = 0.1 (ln s_hat - ln s_star)^2.
inline double scale_regression_loss(double s_hat, double s_star)
{
    if (!(s_hat > 0.0) || !(s_star > 0.0) || !std::isfinite(s_hat) || !std::isfinite(s_star))
        throw InvalidScale("scales must be positive and finite");
    const double d = std::log(s_hat) - std::log(s_star);
    return 0.1 * d * d;
}

}  // namespace tracespatial
