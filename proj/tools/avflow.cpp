// avflow command-line front end: run / rectify / classify / mesh-info / post.
// Exit codes: 0 success, 1 numerical failure, 2 input error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "avflow/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"avflow: pulsatile flow simulation for vessel junctions"};
  app.require_subcommand(1);
  bool json_logs = false;
  app.add_flag("--json-logs", json_logs, "line-delimited JSON logs instead of plain text");

  std::string config_path, input_csv, output_csv, mesh_path, checkpoint_path;

  CLI::App* c_run = app.add_subcommand("run", "run a simulation from a JSON config document");
  c_run->add_option("config", config_path, "JSON configuration file")->required();

  CLI::App* c_rectify =
      app.add_subcommand("rectify", "enforce mass conservation on a waveform CSV");
  c_rectify->add_option("input", input_csv, "measured waveform CSV")->required();
  c_rectify->add_option("output", output_csv, "rectified waveform CSV to write")->required();

  CLI::App* c_classify =
      app.add_subcommand("classify", "report the flow configuration of a waveform CSV");
  c_classify->add_option("input", input_csv, "waveform CSV")->required();

  CLI::App* c_info = app.add_subcommand("mesh-info", "report mesh structure and patch areas");
  c_info->add_option("mesh", mesh_path, "Gmsh MSH 2.2 ASCII file")->required();

  CLI::App* c_post =
      app.add_subcommand("post", "re-derive postprocessing outputs from a checkpoint");
  c_post->add_option("config", config_path, "JSON configuration file")->required();
  c_post->add_option("--checkpoint", checkpoint_path, "checkpoint file written by run")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad usage is an input error
  }

  try {
    const avflow::Logger log(std::cout, json_logs);
    if (c_run->parsed()) {
      avflow::cmd_run(avflow::load_run_config(config_path), log);
    } else if (c_rectify->parsed()) {
      avflow::cmd_rectify(input_csv, output_csv, log);
    } else if (c_classify->parsed()) {
      avflow::cmd_classify(input_csv, log);
    } else if (c_info->parsed()) {
      avflow::cmd_mesh_info(mesh_path, log, json_logs);
    } else if (c_post->parsed()) {
      avflow::cmd_post(avflow::load_run_config(config_path), checkpoint_path, log);
    }
    return 0;
  } catch (const avflow::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const avflow::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
