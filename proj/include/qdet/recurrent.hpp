// Copyright 2026 The qdet Authors.
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

#ifndef QDET_RECURRENT_HPP_
#define QDET_RECURRENT_HPP_

#include <string>
#include <variant>
#include <vector>

#include "qdet/layers.hpp"
#include "qdet/sequence.hpp"

namespace qdet {

enum class CellType { kGru, kLstm };
enum class Direction { kForward, kBackward };

// Gated recurrent unit. Update gate u interpolates toward the candidate:
// s_t = (1 - u) * s_prev + u * c~.
struct GruCell {
  ad::Parameter Wr, Ur, br;
  ad::Parameter Wu, Uu, bu;
  ad::Parameter Wc, Uc, bc;
  int64_t input = 0, hidden = 0;

  static GruCell create(const std::string& prefix, int64_t input, int64_t hidden,
                        RandomStream& rng, bool orthogonal_recurrent);

  ad::Var step(const ad::Var& x, const ad::Var& s_prev) const;

  std::vector<ad::Parameter> parameters() const;
};

// LSTM without peepholes; forget-gate bias initialized to 1.
struct LstmCell {
  ad::Parameter Wi, Ui, bi;
  ad::Parameter Wf, Uf, bf;
  ad::Parameter Wo, Uo, bo;
  ad::Parameter Wg, Ug, bg;
  int64_t input = 0, hidden = 0;

  struct State {
    ad::Var h, c;
  };

  static LstmCell create(const std::string& prefix, int64_t input, int64_t hidden,
                         RandomStream& rng, bool orthogonal_recurrent);

  State step(const ad::Var& x, const State& prev) const;

  std::vector<ad::Parameter> parameters() const;
};

// Either cell behind one step interface (LSTM cell state is threaded
// internally by the runner).
struct RecurrentCell {
  std::variant<GruCell, LstmCell> cell;

  static RecurrentCell create(CellType type, const std::string& prefix, int64_t input,
                              int64_t hidden, RandomStream& rng, bool orthogonal_recurrent);

  int64_t hidden() const;
  int64_t input() const;
  std::vector<ad::Parameter> parameters() const;
};

// Runs a cell over a padded batch. States at padded positions carry the
// last valid state; the backward direction consumes each example's valid
// prefix in reverse.
StepSequence rnn_forward(const RecurrentCell& cell, const StepSequence& inputs, Direction dir);

// Independent forward and backward cells; output per step is the
// concatenation [fwd_t ; bwd_t].
struct BiRnn {
  RecurrentCell fwd, bwd;

  static BiRnn create(CellType type, const std::string& prefix, int64_t input, int64_t hidden,
                      RandomStream& rng, bool orthogonal_recurrent);

  int64_t out_dim() const { return 2 * fwd.hidden(); }
  std::vector<ad::Parameter> parameters() const;
};

StepSequence birnn_forward(const BiRnn& net, const StepSequence& inputs);

}  // namespace qdet

#endif  // QDET_RECURRENT_HPP_
