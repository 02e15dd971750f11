// Copyright 2026 The xaiens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// External oracle speaking the file protocol, backed by a linear model:
//
//   linear_oracle predict WEIGHTS INPUT OUTPUT
//   linear_oracle explain WEIGHTS INPUT OUTPUT TARGET

#include <iostream>
#include <string>

#include "xaiens/npy.hpp"
#include "xaiens/oracles.hpp"

int main(int argc, char** argv) {
  using namespace xaiens;
  const std::string mode = argc > 1 ? argv[1] : "";
  if (!((mode == "predict" && argc == 5) || (mode == "explain" && argc == 6))) {
    std::cerr << "usage: linear_oracle predict|explain WEIGHTS INPUT OUTPUT [TARGET]\n";
    return 64;
  }
  try {
    LinearModel model = LinearModel::from_npy(argv[2]);
    const NpyArray in = read_npy(argv[3]);
    const Batch batch{model.shape(), in.to_matrix()};
    if (mode == "predict") {
      const RowMatrixXd logits = model.predict(batch);
      write_npy(argv[4], NpyArray::from_matrix({static_cast<std::size_t>(logits.rows()),
                                                static_cast<std::size_t>(logits.cols())},
                                               logits));
    } else {
      const RowMatrixXd attr = model.explain(batch, std::stol(argv[5]));
      write_npy(argv[4], NpyArray::from_matrix(in.shape, attr));
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
