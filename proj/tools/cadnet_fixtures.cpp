// Writes a synthetic PGM dataset tree in the four-class directory layout, so
// the CLI can be exercised without any external data.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#include "cadnet/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cadnet-fixtures: synthetic dataset generator"};

  std::string out_dir;
  long long per_class = 40;
  long long size = 32;
  std::uint64_t seed = 0;
  int noise = 20;
  app.add_option("--out", out_dir, "Output dataset root")->required();
  app.add_option("--per-class", per_class, "Images per class");
  app.add_option("--size", size, "Square image size in pixels");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--noise", noise, "Per-pixel noise amplitude");

  CLI11_PARSE(app, argc, argv);

  cadnet::RngState rng(seed);
  const auto classes = cadnet::synth::kaggle_style_classes(per_class);
  const cadnet::Index written = cadnet::synth::write_dataset_tree(
      out_dir, classes, size, size, rng, noise);
  std::cout << "wrote " << written << " images under " << out_dir << "\n";
  return 0;
}
