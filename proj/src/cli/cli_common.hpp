#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace anchorpano::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Options that can come from flags or from a JSON config file. A flag given
/// on the command line wins over the config value, which wins over the
/// built-in default.
class Params {
public:
    explicit Params(CLI::App* app) : app_(app) {}

    template <typename T>
    CLI::Option* add(const std::string& name, T& target, const std::string& help) {
        CLI::Option* opt = app_->add_option("--" + name, target, help)->capture_default_str();
        entries_.push_back(Entry{name, opt,
                                 [&target, name](const json& j) {
                                     try {
                                         target = j.get<T>();
                                     } catch (const json::exception& e) {
                                         throw ConfigError("config key '" + name + "': " + e.what());
                                     }
                                 },
                                 [&target] { return json(target); }});
        return opt;
    }

    CLI::Option* flag(const std::string& name, bool& target, const std::string& help);

    /// Fills every option not given on the command line from the config.
    void apply_config(const json& config);
    /// Effective values of every registered option.
    json values() const;

private:
    struct Entry {
        std::string name;
        CLI::Option* option;
        std::function<void(const json&)> load;
        std::function<json()> dump;
    };
    CLI::App* app_;
    std::vector<Entry> entries_;
};

/// Collects what one run read and wrote, then writes manifest.json.
class RunRecord {
public:
    RunRecord(std::string command, fs::path out_dir) : command_(std::move(command)), out_(std::move(out_dir)) {}

    const fs::path& out_dir() const { return out_; }
    fs::path path(const std::string& rel) const { return out_ / rel; }

    /// Hashes an input file (and its tensor manifest when present).
    void input(const fs::path& p);
    /// Registers an output written under the output directory.
    void output(const std::string& rel);
    void tensor_output(const std::string& rel);

    void write_json_output(const std::string& rel, const json& j);
    void write_png_output(const std::string& rel, const Image& img);

    json manifest(const json& params) const;

private:
    std::string command_;
    fs::path out_;
    json inputs_ = json::object();
    std::vector<std::string> outputs_;
};

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    std::unique_ptr<Params> params;
    std::string out_dir;
    std::string config_path;
    std::function<void(RunRecord&)> run;
};

using CommandPtr = std::unique_ptr<Command>;

CommandPtr make_command(CLI::App& root, const std::string& name, const std::string& description);

CommandPtr make_synth(CLI::App& root);
CommandPtr make_planes_fit(CLI::App& root);
CommandPtr make_classify(CLI::App& root);
CommandPtr make_assign(CLI::App& root);
CommandPtr make_steer(CLI::App& root);
CommandPtr make_select(CLI::App& root);
CommandPtr make_metrics(CLI::App& root);
CommandPtr make_diagnose_layers(CLI::App& root);
CommandPtr make_pipeline(CLI::App& root);

}  // namespace anchorpano::cli
