#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "vitens/classifier.hpp"
#include "vitens/surrogate.hpp"

namespace vitens {

// Subcommands: dataset-gen, train-backbone, train-trm, attack, evaluate,
// transfer-matrix, gradcheck. `args` excludes the program name. Returns the
// process exit code; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// Loads any checkpoint written by the library ("vit", "vit+refinement" or
// "cnn") by inspecting its kind.
std::shared_ptr<const Classifier> load_classifier(const std::filesystem::path& path);
std::shared_ptr<const ViTView> load_surrogate(const std::filesystem::path& path);

}  // namespace vitens
