#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "voxnox/io.hpp"
#include "voxnox/orchestrator.hpp"

using namespace voxnox;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(Strategy s) {
    ExperimentConfig c;
    c.strategy = s;
    c.iterations = 2;
    c.populations = 2;
    c.generations_per_phase = 3;
    c.latest_set_size = 4;
    c.lattice_size = 8;
    c.seed = 7;
    c.neat.population_size = 8;
    c.autoencoder.lattice_size = 8;
    c.autoencoder.latent_dim = 8;
    c.autoencoder.widths = {2, 4, 4};
    c.autoencoder.head_width = 2;
    c.autoencoder.epochs = 2;
    c.autoencoder.batch_size = 4;
    return c;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("voxnox_orch_" + name);
    fs::remove_all(p);
    return p;
}

// Every file under a run except the free-form log, as relative path -> bytes.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "log.txt")
            out[fs::relative(e.path(), dir).string()] = read_file(e.path().string());
    return out;
}

} // namespace

TEST(Strategy, ParseAndName) {
    for (auto s : {Strategy::static_model, Strategy::random, Strategy::latest_set, Strategy::full_history,
                   Strategy::novelty_archive})
        EXPECT_EQ(parse_strategy(strategy_name(s)), s);
    try {
        parse_strategy("bogus");
        FAIL();
    } catch (const Error& e) {
        const std::string msg = e.what();
        for (const char* name : {"static", "random", "latest_set", "full_history", "novelty_archive"})
            EXPECT_NE(msg.find(name), std::string::npos) << name;
    }
}

TEST(Config, RoundTripAndDefaults) {
    const auto c = tiny_config(Strategy::latest_set);
    EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
    const auto d = config_from_json(nlohmann::json::object());
    EXPECT_EQ(d.strategy, Strategy::novelty_archive);
    EXPECT_EQ(d.neighbors, 15);
    EXPECT_EQ(d.archive_inserts, 3);
    EXPECT_EQ(d.autoencoder.latent_dim, 256);
    // the autoencoder follows the lattice size unless told otherwise
    EXPECT_EQ(config_from_json({{"lattice_size", 12}}).autoencoder.lattice_size, 12);
}

TEST(Config, ErrorsNameTheField) {
    auto expect_field = [](const nlohmann::json& j, const std::string& field) {
        try {
            config_from_json(j);
            FAIL() << j.dump();
        } catch (const Error& e) {
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    expect_field({{"populations", "ten"}}, "populations");
    expect_field({{"iterations", 0}}, "iterations");
    expect_field({{"populatons", 3}}, "populatons");
    expect_field({{"strategy", "greedy"}}, "latest_set");
    expect_field({{"schema_version", 99}}, "schema_version");
    expect_field({{"neat", {{"population_size", -5}}}}, "population_size");
}

TEST(Config, LoadFromFile) {
    const auto dir = scratch("cfg");
    fs::create_directories(dir);
    write_file_atomic((dir / "c.json").string(), R"({"strategy": "random", "seed": 3})");
    const auto c = load_config(dir / "c.json");
    EXPECT_EQ(c.strategy, Strategy::random);
    EXPECT_EQ(c.seed, 3u);
    write_file_atomic((dir / "bad.json").string(), "{not json");
    EXPECT_THROW(load_config(dir / "bad.json"), Error);
    EXPECT_THROW(load_config(dir / "missing.json"), Error);
    fs::remove_all(dir);
}

TEST(Bootstrap, ShapesAndSeeds) {
    const auto cfg = tiny_config(Strategy::novelty_archive);
    const auto a = bootstrap(cfg);
    const auto b = bootstrap(cfg);
    ASSERT_EQ(a.populations.size(), 2u);
    EXPECT_EQ(a.completed_phases, 0);
    EXPECT_EQ(a.model.weights(), b.model.weights());
    for (const auto& p : a.populations) {
        EXPECT_EQ(p.neat.genomes.size(), 8u);
        EXPECT_TRUE(p.archive.empty());
    }
    EXPECT_NE(population_to_json(a.populations[0])["genomes"], population_to_json(a.populations[1])["genomes"]);
}

TEST(Exploration, ArchiveCappedAndPopulationStable) {
    auto state = bootstrap(tiny_config(Strategy::novelty_archive));
    std::vector<GenerationStats> rows;
    exploration_phase(state, 1, [&](const GenerationStats& s) { rows.push_back(s); }, {});
    EXPECT_EQ(rows.size(), 2u * 3u);
    for (const auto& p : state.populations) {
        EXPECT_LE(p.archive.size(), 3u * 3u);
        EXPECT_EQ(p.neat.genomes.size(), 8u);
        EXPECT_EQ(p.lattices.size(), 8u);
        EXPECT_EQ(p.novelty.size(), 8u);
        std::set<std::uint64_t> seen;
        for (const auto& e : p.archive.entries())
            EXPECT_EQ(e.latent.size(), 8u);
    }
    for (const auto& r : rows) {
        EXPECT_GE(r.feasible, 0);
        EXPECT_LE(r.feasible, 8);
        EXPECT_EQ(r.phase, 1);
    }
    ASSERT_EQ(state.phase_selections.size(), 1u);
    EXPECT_LE(state.phase_selections[0].size(), 2u * 4u);
}

TEST(TrainingSet, CountsPerStrategy) {
    auto state = bootstrap(tiny_config(Strategy::full_history));
    exploration_phase(state, 1, {}, {});
    exploration_phase(state, 2, {}, {});
    const auto& sel = state.phase_selections;
    ASSERT_EQ(sel.size(), 2u);
    EXPECT_TRUE(assemble_training_set(state, Strategy::static_model).empty());
    EXPECT_TRUE(assemble_training_set(state, Strategy::random).empty());
    EXPECT_EQ(assemble_training_set(state, Strategy::latest_set), sel[1]);
    EXPECT_EQ(assemble_training_set(state, Strategy::full_history).size(), sel[0].size() + sel[1].size());
    const auto archived = assemble_training_set(state, Strategy::novelty_archive);
    std::size_t total = 0;
    for (const auto& p : state.populations)
        total += p.archive.size();
    EXPECT_LE(archived.size(), total);
    for (std::size_t i = 0; i < archived.size(); ++i)
        for (std::size_t j = i + 1; j < archived.size(); ++j)
            EXPECT_FALSE(archived[i] == archived[j]);
}

TEST(LatestSelection, MostNovelFeasibleFirst) {
    PopulationState pop;
    for (int i = 0; i < 5; ++i) {
        MaterialLattice l({2, 2, 2});
        l[std::size_t(i)] = Material::Wall;
        pop.lattices.push_back(l);
    }
    pop.feasible = {1, 0, 1, 1, 1};
    pop.novelty = {0.5, 9.0, 0.7, 0.1, 0.7};
    std::vector<std::string> logged;
    const auto sel = latest_selection(pop, 3, [&](const std::string& m) { logged.push_back(m); });
    ASSERT_EQ(sel.size(), 3u);
    EXPECT_EQ(sel[0], pop.lattices[2]);
    EXPECT_EQ(sel[1], pop.lattices[4]);
    EXPECT_EQ(sel[2], pop.lattices[0]);
    EXPECT_TRUE(logged.empty());
    EXPECT_EQ(latest_selection(pop, 10, [&](const std::string& m) { logged.push_back(m); }).size(), 4u);
    EXPECT_EQ(logged.size(), 1u);
}

TEST(Transformation, RandomRedrawsEveryPhase) {
    auto state = bootstrap(tiny_config(Strategy::random));
    const auto initial = state.model.weights();
    transformation_phase(state, 1, {});
    const auto first = state.model.weights();
    transformation_phase(state, 2, {});
    EXPECT_NE(first, initial);
    EXPECT_NE(state.model.weights(), first);
}

TEST(Transformation, EmptyTrainingSetIsAnError) {
    auto state = bootstrap(tiny_config(Strategy::latest_set));
    EXPECT_THROW(transformation_phase(state, 1, {}), Error);
}

TEST(PopulationJson, RoundTrip) {
    auto state = bootstrap(tiny_config(Strategy::novelty_archive));
    exploration_phase(state, 1, {}, {});
    const auto& pop = state.populations[0];
    const auto j = population_to_json(pop);
    auto back = population_from_json(nlohmann::json::parse(j.dump()), {8, 8, 8});
    EXPECT_EQ(population_to_json(back), j);
    EXPECT_EQ(back.lattices, pop.lattices);
    EXPECT_EQ(uniform(back.rng, 0, 1), uniform(state.populations[0].rng, 0, 1));
    auto broken = j;
    broken.erase("rng");
    EXPECT_THROW(population_from_json(broken, {8, 8, 8}), Error);
}

TEST(Run, LayoutAndResumeDeterminism) {
    const auto cfg = tiny_config(Strategy::novelty_archive);
    const auto whole = scratch("whole");
    const auto split = scratch("split");
    EXPECT_EQ(run(cfg, whole), RunStatus::completed);
    for (const char* f : {"config.json", "log.txt", "bootstrap/model.bin", "phase_01/explored.json",
                          "phase_01/population_00.json", "phase_01/archive_01.json", "phase_02/model.json",
                          "metrics/diversity.csv", "metrics/structure.csv", "metrics/training.csv"})
        EXPECT_TRUE(fs::exists(whole / f)) << f;

    RunOptions stop;
    stop.stop_after_checkpoints = 2;
    EXPECT_EQ(run(cfg, split, stop), RunStatus::interrupted);
    stop.stop_after_checkpoints = 1;
    EXPECT_EQ(resume(split, stop), RunStatus::interrupted);
    EXPECT_EQ(resume(split), RunStatus::completed);
    EXPECT_EQ(snapshot(whole), snapshot(split));
    EXPECT_EQ(resume(split), RunStatus::completed);

    // a checkpoint reload continues exactly as the live state did
    const auto state = load_checkpoint(whole, 1);
    EXPECT_EQ(state.completed_phases, 1);
    EXPECT_EQ(state.model.weights(), AutoencoderModel::load(whole / "phase_01").weights());
    EXPECT_THROW(run(cfg, whole), Error);
    fs::remove_all(whole);
    fs::remove_all(split);
}

TEST(Run, StaticModelNeverChanges) {
    const auto dir = scratch("static");
    run(tiny_config(Strategy::static_model), dir);
    const auto boot = read_file((dir / "bootstrap/model.bin").string());
    EXPECT_EQ(read_file((dir / "phase_01/model.bin").string()), boot);
    EXPECT_EQ(read_file((dir / "phase_02/model.bin").string()), boot);

    // reusing the bootstrap of another strategy gives the same starting model
    const auto other = scratch("static_from");
    RunOptions opt;
    opt.bootstrap_from = dir;
    auto cfg = tiny_config(Strategy::latest_set);
    cfg.iterations = 1;
    run(cfg, other, opt);
    EXPECT_EQ(read_file((other / "bootstrap/model.bin").string()), boot);
    EXPECT_EQ(read_file((other / "bootstrap/population_00.json").string()),
              read_file((dir / "bootstrap/population_00.json").string()));
    auto mismatched = tiny_config(Strategy::latest_set);
    mismatched.seed = 8;
    EXPECT_THROW(run(mismatched, scratch("static_bad"), opt), Error);
    fs::remove_all(dir);
    fs::remove_all(other);
    fs::remove_all(scratch("static_bad"));
}
