// Copyright 2026 The ToonID Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Writes the synthetic movie fixture and a matching pipeline config.

#include <iostream>

#include <CLI11.hpp>

#include "synthetic_movie.hpp"

int main(int argc, char** argv) {
  CLI::App app{"toonid-synth - write a synthetic movie fixture"};
  std::string out;
  toonid::synth::SyntheticMovieOptions opts;
  app.add_option("--out", out, "fixture directory")->required();
  app.add_option("--seed", opts.seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    const auto movie = toonid::synth::write_synthetic_movie(out, opts);
    std::cout << movie.config_path.string() << std::endl;
  } catch (const toonid::Error& e) {
    std::cerr << toonid::error_json("synth", e) << std::endl;
    return 1;
  }
  return 0;
}
