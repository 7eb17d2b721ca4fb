#pragma once

#include "srlf/data.hpp"
#include "srlf/model.hpp"
#include "srlf/training.hpp"

#include <string>
#include <vector>

namespace fixtures {

inline srlf::SynthConfig tiny_corpus(std::size_t threads = 24, std::uint64_t seed = 3) {
  srlf::SynthConfig c;
  c.threads = threads;
  c.comments = 3;
  c.vocab = 20;
  c.tokens = 8;
  c.seed = seed;
  return c;
}

inline srlf::TrainConfig tiny_training(std::uint64_t seed = 1) {
  auto c = srlf::TrainConfig::tiny();
  c.seed = seed;
  return c;
}

inline srlf::Model tiny_model(std::span<const srlf::Thread> threads, std::uint64_t seed = 1) {
  return srlf::initial_model(tiny_training(seed), threads);
}

/// A thread with `real` comments whose texts are distinct, stances cycling.
inline srlf::Thread hand_thread(std::size_t real, srlf::Veracity label = srlf::Veracity::TR) {
  srlf::Thread t;
  t.id = "hand";
  t.source = "w001 w002 w003 w004 w005";
  t.label = label;
  for (std::size_t i = 0; i < real; ++i) {
    srlf::Comment c;
    c.text = "w00" + std::to_string(6 + i) + " w010 w011 w012";
    c.stance = static_cast<srlf::Stance>(i % 4);
    c.corrupted = i % 2 == 1;
    t.comments.push_back(c);
  }
  return t;
}

}  // namespace fixtures
