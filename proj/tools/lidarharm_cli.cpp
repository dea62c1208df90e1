// lidarharm: synthesize, corrupt, build datasets, train, harmonize,
// evaluate and render.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "lidarharm/error.hpp"
#include "lidarharm/pipeline.hpp"

namespace lh = lidarharm;

namespace {

void log_line(const std::string& msg)
{
    std::cerr << msg << '\n';
}

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string dataset;
};

lh::Config resolve(const Options& o)
{
    lh::Config c = lh::load_config(o.config);
    if (o.seed)
        c.seed = *o.seed;
    lh::finalize(c);
    return c;
}

std::vector<lh::Variant> variants_of(const Options& o)
{
    if (o.dataset.empty())
        return {lh::Variant::noshift, lh::Variant::shift};
    return {lh::parse_variant(o.dataset)};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"LiDAR intensity harmonization toolkit"};
    app.require_subcommand(1);
    Options opt;

    auto pipeline_command = [&](const std::string& name, const std::string& help, bool has_dataset) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "work directory")->capture_default_str();
        sub->add_option("--seed", opt.seed, "overrides the configured seed");
        sub->add_option("--threads", opt.threads, "worker threads; 1 is fully deterministic")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        if (has_dataset)
            sub->add_option("--dataset", opt.dataset, "noshift or shift (default: both)")
                ->check(CLI::IsMember({"noshift", "shift"}));
        return sub;
    };
    CLI::App* synth = pipeline_command("synth", "generate the synthetic scene and flight strips", false);
    CLI::App* corrupt = pipeline_command("corrupt", "apply response curves (and the brightness shift)", false);
    CLI::App* build = pipeline_command("build-dataset", "build training examples", true);
    CLI::App* train = pipeline_command("train", "train the harmonization network", true);
    CLI::App* harmonize = pipeline_command("harmonize", "harmonize the evaluation source scan", true);
    CLI::App* evaluate = pipeline_command("evaluate", "run the benchmark on the evaluation tile", true);
    CLI::App* render = pipeline_command("render", "render the evaluation tile to PPM images", true);
    CLI::App* version = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (version->parsed()) {
            std::cout << LIDARHARM_VERSION << '\n';
            return 0;
        }
        const lh::Config config = resolve(opt);
        const std::filesystem::path out = opt.out;
        if (synth->parsed())
            lh::stage_synth(config, out, log_line);
        else if (corrupt->parsed())
            lh::stage_corrupt(config, out, log_line);
        else if (build->parsed())
            for (auto v : variants_of(opt))
                lh::stage_build_dataset(config, out, v, opt.threads, log_line);
        else if (train->parsed())
            for (auto v : variants_of(opt))
                lh::stage_train(config, out, v, opt.threads, log_line);
        else if (harmonize->parsed())
            for (auto v : variants_of(opt))
                lh::stage_harmonize(config, out, v, opt.threads, log_line);
        else if (evaluate->parsed()) {
            const auto report = lh::stage_evaluate(config, out, variants_of(opt), opt.threads, log_line);
            std::cerr << lh::report_table(report);
        } else if (render->parsed())
            for (auto v : variants_of(opt))
                lh::stage_render(config, out, v, opt.threads, log_line);
        return 0;
    } catch (const lh::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
