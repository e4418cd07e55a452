#include "anchorpano/cli.hpp"

#include "cli_common.hpp"

#include <iostream>
#include <set>

namespace anchorpano {

namespace cli {

CLI::Option* Params::flag(const std::string& name, bool& target, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + name, target, help);
    entries_.push_back(Entry{name, opt,
                             [&target, name](const json& j) {
                                 if (!j.is_boolean()) throw ConfigError("config key '" + name + "' must be a boolean");
                                 target = j.get<bool>();
                             },
                             [&target] { return json(target); }});
    return opt;
}

void Params::apply_config(const json& config) {
    if (!config.is_object()) throw ConfigError("config file must hold a JSON object");
    std::set<std::string> known;
    for (const auto& e : entries_) known.insert(e.name);
    for (const auto& [key, value] : config.items())
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    for (const auto& e : entries_)
        if (e.option->count() == 0 && config.contains(e.name)) e.load(config.at(e.name));
}

json Params::values() const {
    json j = json::object();
    for (const auto& e : entries_) j[e.name] = e.dump();
    return j;
}

void RunRecord::input(const fs::path& p) {
    if (!fs::exists(p)) throw DataError("input not found: " + p.string());
    inputs_[p.generic_string()] = sha256_file(p);
    const fs::path m = manifest_path(p);
    if (fs::exists(m)) inputs_[m.generic_string()] = sha256_file(m);
}

void RunRecord::output(const std::string& rel) { outputs_.push_back(rel); }

void RunRecord::tensor_output(const std::string& rel) {
    outputs_.push_back(rel);
    outputs_.push_back(rel + ".json");
}

void RunRecord::write_json_output(const std::string& rel, const json& j) {
    write_json(path(rel), j);
    output(rel);
}

void RunRecord::write_png_output(const std::string& rel, const Image& img) {
    write_png(path(rel), img);
    output(rel);
}

json RunRecord::manifest(const json& params) const {
    json outputs = json::object();
    for (const auto& rel : outputs_) outputs[rel] = sha256_file(out_ / rel);
    return {{"tool", kToolName},
            {"version", kToolVersion},
            {"command", command_},
            {"params", params},
            {"inputs", inputs_},
            {"outputs", outputs}};
}

CommandPtr make_command(CLI::App& root, const std::string& name, const std::string& description) {
    auto cmd = std::make_unique<Command>();
    cmd->name = name;
    cmd->app = root.add_subcommand(name, description);
    cmd->params = std::make_unique<Params>(cmd->app);
    cmd->app->add_option("--out", cmd->out_dir, "Output directory")->required();
    cmd->app->add_option("--config", cmd->config_path, "JSON config; command-line flags take precedence");
    return cmd;
}

}  // namespace cli

namespace {

const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::config: return "config";
        case ErrorKind::data: return "data";
        case ErrorKind::service: return "service";
    }
    return "data";
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::config: return kExitConfig;
        case ErrorKind::data: return kExitData;
        case ErrorKind::service: return kExitService;
    }
    return kExitData;
}

int report(std::ostream& err, const std::string& command, ErrorKind kind, const std::string& message) {
    nlohmann::json j = {{"error", {{"kind", kind_name(kind)}, {"command", command}, {"message", message}}}};
    err << j.dump() << '\n';
    return exit_code(kind);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli;
    CLI::App app{"Layout-anchored panorama completion toolkit", kToolName};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::vector<CommandPtr> commands;
    commands.push_back(make_synth(app));
    commands.push_back(make_planes_fit(app));
    commands.push_back(make_classify(app));
    commands.push_back(make_assign(app));
    commands.push_back(make_steer(app));
    commands.push_back(make_select(app));
    commands.push_back(make_metrics(app));
    commands.push_back(make_diagnose_layers(app));
    commands.push_back(make_pipeline(app));

    // CLI11 wants the arguments in reverse order.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::Success&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return report(err, "", ErrorKind::config, e.what());
    }

    Command* active = nullptr;
    for (auto& c : commands)
        if (c->app->parsed()) active = c.get();
    if (!active) return report(err, "", ErrorKind::config, "no subcommand given");

    try {
        if (!active->config_path.empty()) {
            nlohmann::json cfg;
            try {
                cfg = read_json(active->config_path);
            } catch (const DataError& e) {
                throw ConfigError(e.what());
            }
            active->params->apply_config(cfg);
        }
        fs::create_directories(active->out_dir);
        RunRecord record(active->name, active->out_dir);
        if (!active->config_path.empty()) record.input(active->config_path);
        active->run(record);
        const fs::path manifest = record.path("manifest.json");
        write_json(manifest, record.manifest(active->params->values()));
        out << manifest.generic_string() << '\n';
        return kExitOk;
    } catch (const Error& e) {
        return report(err, active->name, e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return report(err, active->name, ErrorKind::data, e.what());
    } catch (const fs::filesystem_error& e) {
        return report(err, active->name, ErrorKind::data, e.what());
    } catch (const std::exception& e) {
        return report(err, active->name, ErrorKind::data, e.what());
    }
}

}  // namespace anchorpano
