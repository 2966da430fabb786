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

#include "qdet/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qdet/rng.hpp"
#include "qdet/wav.hpp"

namespace qdet {

namespace {

const std::vector<std::string> kNouns = {
    "meeting", "report", "call",     "review",       "project",  "deadline",
    "demo",    "budget", "schedule", "presentation", "workshop", "interview",
};

const std::vector<std::string> kPersons = {"alex", "jordan", "sam", "taylor", "morgan", "casey"};

const std::vector<std::string> kYesNoTemplates = {
    "did you attend the {n}",
    "are you coming to the {n}",
    "can we reschedule the {n}",
    "have you seen the {n}",
    "will {p} join the {n}",
    "do you want to review the {n}",
    "is the {n} still on",
    "could you send me the {n}",
    "should we invite {p} to the {n}",
    "was the {n} helpful",
};

const std::vector<std::string> kWhTemplates = {
    "where did you put the {n}",
    "what did you think of the {n}",
    "when does the {n} start",
    "who is running the {n}",
    "why was the {n} moved",
    "how long is the {n}",
    "which {n} should we use",
    "what time is the {n}",
    "where is the {n} happening",
    "how did the {n} go",
};

// Shared by declarative questions and statements; only audio separates them.
const std::vector<std::string> kDeclarativeTemplates = {
    "you are at the {n}",
    "you already sent the {n}",
    "the {n} is tomorrow",
    "they finished the {n}",
    "{p} is joining the {n}",
    "we are moving the {n}",
    "the {n} went well",
    "you talked to {p} about the {n}",
    "the team reviewed the {n}",
    "she wants to skip the {n}",
    "there is another {n} this week",
    "he took notes during the {n}",
};

std::string fill_template(const std::string& tmpl, RandomStream& rng) {
  std::string out;
  out.reserve(tmpl.size() + 8);
  for (size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      const char kind = tmpl[i + 1];
      const auto& pool = kind == 'p' ? kPersons : kNouns;
      out += pool[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(pool.size())))];
      i += 2;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

int word_count(const std::string& text) {
  int words = 0;
  bool in_word = false;
  for (char c : text) {
    if (c == ' ') {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

struct Family {
  const char* name;         // meta.type
  const char* text_stream;  // text rng tag; shared between decl-q and statement
  const std::vector<std::string>* templates;
  int label;
};

const std::vector<Family>& families() {
  static const std::vector<Family> f = {
      {"yesno", "yesno", &kYesNoTemplates, 1},
      {"wh", "wh", &kWhTemplates, 1},
      {"declarative_question", "decl", &kDeclarativeTemplates, 1},
      {"statement", "decl", &kDeclarativeTemplates, 0},
  };
  return f;
}

AudioSignal synthesize_utterance(const SynthConfig& config, int words, bool question,
                                 RandomStream& rng) {
  const double duration = std::max(config.min_duration_s, words * config.seconds_per_word);
  const int64_t n = std::llround(duration * config.sample_rate);
  const double f0 = config.f0_base * (1.0 + config.f0_jitter * rng.uniform(-1.0, 1.0));
  const double slope = question ? config.question_rise : -config.statement_fall;

  AudioSignal sig;
  sig.sample_rate = config.sample_rate;
  sig.samples.resize(static_cast<size_t>(n));

  const int64_t fade = std::min<int64_t>(n / 4, config.sample_rate / 100);  // 10 ms
  double phase = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    // Flat contour until the final quarter, then a linear rise or fall.
    const double ramp = t < 0.75 ? 0.0 : (t - 0.75) / 0.25;
    const double f = f0 * (1.0 + slope * ramp);
    phase += 2.0 * M_PI * f / config.sample_rate;
    // Fundamental plus two harmonics.
    double s = std::sin(phase) + 0.5 * std::sin(2.0 * phase) + 0.25 * std::sin(3.0 * phase);
    s *= 0.45 / 1.75;
    s += config.noise_level * rng.normal();
    double env = 1.0;
    if (i < fade) env = static_cast<double>(i) / static_cast<double>(fade);
    if (n - 1 - i < fade) env = std::min(env, static_cast<double>(n - 1 - i) / static_cast<double>(fade));
    sig.samples[static_cast<size_t>(i)] = s * env;
  }
  return sig;
}

}  // namespace

void SynthConfig::validate() const {
  const double total = p_yesno + p_wh + p_declarative_question + p_statement;
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("synth proportions sum to " + std::to_string(total) + ", expected 1");
  }
  if (n_examples < 1) throw ConfigError("synth needs n_examples >= 1");
  if (sample_rate <= 0) throw ConfigError("synth sample rate must be positive");
}

nlohmann::json SynthConfig::to_json() const {
  return nlohmann::json{
      {"n_examples", n_examples},
      {"proportions",
       {{"yesno", p_yesno},
        {"wh", p_wh},
        {"declarative_question", p_declarative_question},
        {"statement", p_statement}}},
      {"sample_rate", sample_rate},
      {"seed", seed},
      {"f0_base", f0_base},
      {"f0_jitter", f0_jitter},
      {"question_rise", question_rise},
      {"statement_fall", statement_fall},
      {"noise_level", noise_level},
      {"seconds_per_word", seconds_per_word},
      {"min_duration_s", min_duration_s},
  };
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_examples = j.value("n_examples", c.n_examples);
  if (j.contains("proportions")) {
    const auto& p = j.at("proportions");
    c.p_yesno = p.value("yesno", c.p_yesno);
    c.p_wh = p.value("wh", c.p_wh);
    c.p_declarative_question = p.value("declarative_question", c.p_declarative_question);
    c.p_statement = p.value("statement", c.p_statement);
  }
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.seed = j.value("seed", c.seed);
  c.f0_base = j.value("f0_base", c.f0_base);
  c.f0_jitter = j.value("f0_jitter", c.f0_jitter);
  c.question_rise = j.value("question_rise", c.question_rise);
  c.statement_fall = j.value("statement_fall", c.statement_fall);
  c.noise_level = j.value("noise_level", c.noise_level);
  c.seconds_per_word = j.value("seconds_per_word", c.seconds_per_word);
  c.min_duration_s = j.value("min_duration_s", c.min_duration_s);
  c.validate();
  return c;
}

std::vector<Example> generate_synthetic(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");

  // Largest-remainder allocation of example counts per family.
  const std::array<double, 4> props = {config.p_yesno, config.p_wh, config.p_declarative_question,
                                       config.p_statement};
  std::array<int, 4> counts{};
  std::array<double, 4> rem{};
  int assigned = 0;
  for (int i = 0; i < 4; ++i) {
    const double exact = props[static_cast<size_t>(i)] * config.n_examples;
    counts[static_cast<size_t>(i)] = static_cast<int>(std::floor(exact));
    rem[static_cast<size_t>(i)] = exact - std::floor(exact);
    assigned += counts[static_cast<size_t>(i)];
  }
  while (assigned < config.n_examples) {
    int best = 0;
    for (int i = 1; i < 4; ++i) {
      if (rem[static_cast<size_t>(i)] > rem[static_cast<size_t>(best)]) best = i;
    }
    counts[static_cast<size_t>(best)] += 1;
    rem[static_cast<size_t>(best)] = -1.0;
    ++assigned;
  }

  std::vector<Example> out;
  out.reserve(static_cast<size_t>(config.n_examples));
  int global_index = 0;
  for (size_t fi = 0; fi < families().size(); ++fi) {
    const Family& family = families()[fi];
    for (int i = 0; i < counts[fi]; ++i, ++global_index) {
      Example e;
      char idbuf[16];
      std::snprintf(idbuf, sizeof(idbuf), "ex%05d", global_index);
      e.id = idbuf;
      e.label = family.label;
      e.meta["type"] = family.name;

      // Text stream is keyed by (text_stream, i), so the declarative and
      // statement families produce identical texts at equal indices.
      const int tmpl_idx = i % static_cast<int>(family.templates->size());
      RandomStream text_rng(RandomStream::derive(
          config.seed, std::string("text.") + family.text_stream + "." + std::to_string(i)));
      e.text = fill_template((*family.templates)[static_cast<size_t>(tmpl_idx)], text_rng);
      e.meta["template"] = family.text_stream + std::to_string(tmpl_idx);

      RandomStream audio_rng(RandomStream::derive(config.seed, "audio." + e.id));
      const AudioSignal sig =
          synthesize_utterance(config, word_count(e.text), family.label == 1, audio_rng);
      const std::string wav_rel = "wav/" + e.id + ".wav";
      write_wav((fs::path(out_dir) / wav_rel).string(), sig);
      e.wav = wav_rel;
      out.push_back(std::move(e));
    }
  }
  return out;
}

void write_synthetic_corpus(const SynthConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::vector<Example> examples = generate_synthetic(config, out_dir);
  save_dataset((fs::path(out_dir) / "dataset.jsonl").string(), examples);
  std::ofstream os(fs::path(out_dir) / "synth_config.json");
  os << config.to_json().dump(2) << '\n';
}

}  // namespace qdet
