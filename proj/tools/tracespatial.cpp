#include "tracespatial/tracespatial.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <map>

using namespace tracespatial;

namespace {

std::vector<json> read_jsonl(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw InvalidInput(strformat("%s:%zu: %s", path.c_str(), n, e.what()));
        }
    }
    return out;
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    out << text;
}

json counts_json(const MetricCounts& c)
{
    return {{"n", c.n},
            {"start2d", MetricCounts::pct(c.start2d, c.n)},
            {"end2d", MetricCounts::pct(c.end2d, c.n)},
            {"start3d", MetricCounts::pct(c.start3d, c.n)},
            {"end3d", MetricCounts::pct(c.end3d, c.n)},
            {"overall", MetricCounts::pct(c.overall, c.n)}};
}

int cmd_generate(const PipelineConfig& cfg, const std::string& scene_path, const std::string& tasks_arg,
                 std::uint64_t seed, const std::string& out_path, int workers)
{
    const Scene scene = load_scene(scene_path);
    const GenerateResult r = tasks_arg == "auto" ? generate_auto(scene, seed, cfg, workers)
                                                 : generate(scene, load_tasks(tasks_arg), seed, cfg, workers);
    write_file(out_path, r.jsonl());
    std::map<std::string, int> reasons;
    for (const auto& o : r.outcomes)
        if (!o.accepted) ++reasons[o.reason];
    std::cerr << strformat("%zu tasks, %zu accepted", r.outcomes.size(), r.accepted());
    for (const auto& [k, v] : reasons) std::cerr << strformat(", %s: %d", k.c_str(), v);
    std::cerr << "\n";
    return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const std::string& bench_dir, const std::string& pred_path,
                 const std::string& report_path)
{
    const auto samples = load_bench(bench_dir);
    std::map<std::string, json> by_id;
    for (const auto& j : read_jsonl(pred_path)) by_id[j.at("id").get<std::string>()] = j;
    std::vector<std::optional<Trace>> preds;
    for (const auto& s : samples) {
        const auto it = by_id.find(s.id);
        preds.push_back(it == by_id.end() ? std::nullopt : prediction_from_json(it->second, s.scene.camera));
    }
    const SuiteReport rep = evaluate_suite(samples, preds, cfg.bench);
    json per = json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& r = rep.results[i];
        per.push_back({{"id", samples[i].id},
                       {"start2d", r.start2d},
                       {"end2d", r.end2d},
                       {"start3d", r.start3d},
                       {"end3d", r.end3d},
                       {"overall", r.overall},
                       {"sweep_max_fraction", r.sweep_max_fraction}});
    }
    json by_steps = json::object();
    for (const auto& [k, c] : rep.by_step_count) by_steps[std::to_string(k)] = counts_json(c);
    const json report = {{"total", counts_json(rep.total)}, {"by_step_count", by_steps}, {"samples", per}};
    write_file(report_path, report.dump(1) + "\n");
    std::cout << format_report(rep);
    return 0;
}

int cmd_reward(const std::string& in_path, const std::string& out_path)
{
    const auto rows = read_jsonl(in_path);
    std::vector<RewardBundle> bundles;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& j = rows[i];
        const auto gt = answer_trace_from_json(j.at("gt_trace"));
        const auto ann = annotations_from_json(j.at("annotations"));
        bundles.push_back(score_rollout(j.at("rollout_text").get<std::string>(), gt, ann));
        const auto& g = j.contains("group_id") ? j["group_id"] : json(nullptr);
        groups[g.is_string() ? g.get<std::string>() : g.dump()].push_back(i);
    }
    std::vector<double> adv(rows.size(), 0.0);
    for (const auto& [g, idx] : groups) {
        if (idx.size() < 2) continue;
        std::vector<double> totals;
        for (auto i : idx) totals.push_back(bundles[i].total);
        const auto a = group_advantages(totals);
        for (std::size_t k = 0; k < idx.size(); ++k) adv[idx[k]] = a[k];
    }
    std::string out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        json j = reward_to_json(bundles[i]);
        if (rows[i].contains("group_id")) j["group_id"] = rows[i]["group_id"];
        j["advantage"] = adv[i];
        out += j.dump() + "\n";
    }
    write_file(out_path, out);
    return 0;
}

int cmd_extrinsics(const std::string& episode_path, const std::string& mode_name, std::optional<double> threshold)
{
    ExtrinsicsMode mode;
    if (mode_name == "strict")
        mode = ExtrinsicsMode::Strict;
    else if (mode_name == "zero-tolerant")
        mode = ExtrinsicsMode::ZeroTolerant;
    else
        throw InvalidInput("mode must be strict or zero-tolerant");
    const Episode ep = load_episode(episode_path);
    try {
        const auto r = validate_extrinsics(ep, mode, threshold);
        std::cout << json{{"valid", r.valid}, {"fraction", r.fraction}, {"tested", r.tested}, {"aligned", r.aligned}}.dump()
                  << "\n";
    } catch (const Indeterminate& e) {
        std::cout << json{{"valid", nullptr}, {"indeterminate", e.what()}}.dump() << "\n";
    }
    return 0;
}

int cmd_synth_scene(std::uint64_t seed, const std::string& out_dir, const std::string& stem)
{
    save_scene(make_tabletop(seed), out_dir, stem);
    return 0;
}

/// Synthetic tabletops run through the pipeline; accepted traces become bench
/// samples, and their grid answers are written as predictions.
int cmd_synth_bench(const PipelineConfig& cfg, std::uint64_t seed, int scenes, const std::string& out_dir, int workers)
{
    fs::create_directories(out_dir);
    std::string preds;
    std::size_t count = 0;
    for (int k = 0; k < scenes; ++k) {
        const Scene scene = make_tabletop(Rng::derive(seed, static_cast<std::uint64_t>(k)).next());
        const auto res = generate_auto(scene, seed + static_cast<std::uint64_t>(k), cfg, workers);
        for (const auto& o : res.outcomes) {
            if (!o.accepted) continue;
            const auto& src = scene.get(o.task.source_id);
            BenchSample s = self_sample(scene, src, *o.trace, *o.end_box);
            s.id = strformat("s%03d_%s", k, o.lines.front()["task_id"].get<std::string>().c_str());
            s.prompt = o.lines.front()["instruction"].get<std::string>();
            s.category = TaskCategory::PickPlace;
            save_bench_sample(s, out_dir);
            preds += json{{"id", s.id}, {"answer", format_points_3d(o.trace->image_points, scene.camera.width, scene.camera.height)}}
                         .dump() +
                     "\n";
            ++count;
        }
    }
    write_file((fs::path(out_dir) / "reference_preds.jsonl").string(), preds);
    std::cerr << strformat("%zu samples written\n", count);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spatial trace generation, reward scoring and benchmark evaluation"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file overriding module defaults");

    std::string scene_path, tasks_arg = "auto", out_path, bench_dir, pred_path, report_path, in_path, episode_path,
                                mode = "strict", stem = "scene";
    std::uint64_t seed = 0;
    int workers = 1, scenes = 10;
    std::optional<double> threshold;

    auto* gen = app.add_subcommand("generate", "Synthesize traces and QA for a scene");
    gen->add_option("--scene", scene_path)->required();
    gen->add_option("--tasks", tasks_arg, "Task JSON file or 'auto'");
    gen->add_option("--seed", seed);
    gen->add_option("--out", out_path)->required();
    gen->add_option("--workers", workers)->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("evaluate", "Score predictions on a bench directory");
    ev->add_option("--bench", bench_dir)->required();
    ev->add_option("--pred", pred_path)->required();
    ev->add_option("--report", report_path)->required();

    auto* rw = app.add_subcommand("reward", "Score rollouts and compute group advantages");
    rw->add_option("--in", in_path)->required();
    rw->add_option("--out", out_path)->required();

    auto* ex = app.add_subcommand("validate-extrinsics", "Check camera extrinsics of an episode");
    ex->add_option("--episode", episode_path)->required();
    ex->add_option("--mode", mode)->check(CLI::IsMember({"strict", "zero-tolerant"}));
    ex->add_option("--threshold", threshold);

    auto* ss = app.add_subcommand("synth-scene", "Write a synthetic tabletop scene");
    ss->add_option("--seed", seed);
    ss->add_option("--out", out_path)->required();
    ss->add_option("--name", stem);

    auto* sb = app.add_subcommand("synth-bench", "Build a bench directory from synthetic scenes");
    sb->add_option("--seed", seed);
    sb->add_option("--scenes", scenes)->check(CLI::PositiveNumber);
    sb->add_option("--out", out_path)->required();
    sb->add_option("--workers", workers)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (*gen) return cmd_generate(cfg, scene_path, tasks_arg, seed, out_path, workers);
        if (*ev) return cmd_evaluate(cfg, bench_dir, pred_path, report_path);
        if (*rw) return cmd_reward(in_path, out_path);
        if (*ex) return cmd_extrinsics(episode_path, mode, threshold);
        if (*ss) return cmd_synth_scene(seed, out_path, stem);
        if (*sb) return cmd_synth_bench(cfg, seed, scenes, out_path, workers);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidGeometry& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
