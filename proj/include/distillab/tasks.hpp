// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distillab/common.hpp"
#include "distillab/rng.hpp"

namespace distillab {

enum class Split { train, test };

/// Binary classification points in the plane.
struct ClassifDataset {
  std::vector<std::array<double, 2>> inputs;
  std::vector<int> labels;  // 0 or 1
  Split split = Split::train;

  int size() const { return static_cast<int>(inputs.size()); }
};

/// Token sequences: random prefix, separator, reversed prefix. Loss and
/// evaluation apply to the post-separator positions only.
struct SeqDataset {
  std::vector<std::vector<int>> sequences;
  int vocab = 16;          // separator is token vocab-1
  int context_window = 8;  // tokens of left context fed to the model
  Split split = Split::train;

  int size() const { return static_cast<int>(sequences.size()); }
  int sep_token() const { return vocab - 1; }
};

/// Point on the noisy sine task: x2 sits `eps` above the boundary, and the
/// label records which side of the boundary that is.
inline std::pair<std::array<double, 2>, int> sine_sample_from(double x1, double eps) {
  const double x2 = std::sin(0.5 * x1) + eps;
  return {{x1, x2}, eps > 0.0 ? 1 : 0};
}

namespace detail {

inline ClassifDataset gen_sine_split(Rng& rng, int n, Split split) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  ClassifDataset d;
  d.split = split;
  d.inputs.reserve(n);
  d.labels.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x1 = rng.uniform(-kTwoPi, kTwoPi);
    const double eps = rng.normal();
    auto [x, label] = sine_sample_from(x1, eps);
    d.inputs.push_back(x);
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace detail

/// Sine-boundary task. Train and test are drawn from disjoint RNG streams.
inline std::pair<ClassifDataset, ClassifDataset> gen_sine(uint64_t seed, int n_train, int n_test) {
  if (n_train <= 0 || n_test <= 0) throw ConfigError("gen_sine: sample counts must be positive");
  Rng train_rng = Rng::stream(seed, "sine/train");
  Rng test_rng = Rng::stream(seed, "sine/test");
  return {detail::gen_sine_split(train_rng, n_train, Split::train),
          detail::gen_sine_split(test_rng, n_test, Split::test)};
}

/// prefix + separator + reversed prefix.
inline std::vector<int> reverse_copy_sequence(std::span<const int> prefix, int vocab) {
  if (prefix.empty()) throw DataError("reverse_copy_sequence: empty prefix");
  for (int t : prefix)
    if (t < 0 || t >= vocab - 1)
      throw DataError("reverse_copy_sequence: prefix token outside [0, vocab-1)");
  std::vector<int> seq(prefix.begin(), prefix.end());
  seq.reserve(2 * prefix.size() + 1);
  seq.push_back(vocab - 1);
  seq.insert(seq.end(), prefix.rbegin(), prefix.rend());
  return seq;
}

namespace detail {

inline std::vector<int> gen_reverse_copy_sequence(Rng& rng, int vocab, int k_prefix) {
  std::vector<int> prefix(rng.uniform_int(1, k_prefix));
  for (int& t : prefix) t = static_cast<int>(rng.uniform_int(0, vocab - 2));
  return reverse_copy_sequence(prefix, vocab);
}

}  // namespace detail

/// Reverse-copy task: prefix of 1..k_prefix tokens, separator, prefix
/// reversed. Exact duplicates of training sequences are dropped from test.
inline std::pair<SeqDataset, SeqDataset> gen_reverse_copy(uint64_t seed, int vocab, int k_prefix,
                                                          int n_train, int n_test) {
  if (vocab < 4) throw ConfigError("gen_reverse_copy: vocab must be >= 4");
  if (k_prefix < 1 || k_prefix > 8) throw ConfigError("gen_reverse_copy: k_prefix must be in 1..8");
  if (n_train <= 0 || n_test <= 0)
    throw ConfigError("gen_reverse_copy: sample counts must be positive");

  SeqDataset train, test;
  train.split = Split::train;
  test.split = Split::test;
  train.vocab = test.vocab = vocab;
  // The deepest recall is the first prefix token when emitting the last
  // output token, 2*k_prefix positions back.
  train.context_window = test.context_window = 2 * k_prefix;

  Rng train_rng = Rng::stream(seed, "reverse_copy/train");
  for (int i = 0; i < n_train; ++i)
    train.sequences.push_back(detail::gen_reverse_copy_sequence(train_rng, vocab, k_prefix));

  std::set<std::vector<int>> seen(train.sequences.begin(), train.sequences.end());
  Rng test_rng = Rng::stream(seed, "reverse_copy/test");
  for (int i = 0; i < n_test; ++i) {
    auto seq = detail::gen_reverse_copy_sequence(test_rng, vocab, k_prefix);
    if (!seen.contains(seq)) test.sequences.push_back(std::move(seq));
  }
  return {train, test};
}

inline int sep_position(const std::vector<int>& seq, int sep_token) {
  for (size_t i = 0; i < seq.size(); ++i)
    if (seq[i] == sep_token) return static_cast<int>(i);
  throw DataError("sequence has no separator token");
}

/// One-hot context encoding: context_window slots of (vocab+1) entries each,
/// oldest token first, positions before the sequence start padded.
inline void encode_context(const std::vector<int>& seq, int position, int context_window,
                           int vocab, std::span<double> out) {
  const int slot_dim = vocab + 1;
  if (static_cast<int>(out.size()) != context_window * slot_dim)
    throw ShapeError("encode_context: output span has wrong length");
  std::fill(out.begin(), out.end(), 0.0);
  for (int j = 0; j < context_window; ++j) {
    const int src = position - context_window + j;
    const int token = src >= 0 ? seq[src] : vocab;  // index vocab == padding
    out[static_cast<size_t>(j) * slot_dim + token] = 1.0;
  }
}

/// Flattened supervised view of a dataset: one row per evaluated position.
/// Classification contributes one row per sample; sequences contribute one
/// row per post-separator position.
struct SupervisedView {
  int input_dim = 0;
  int n_classes = 0;
  int n_samples = 0;
  std::vector<int> sample_offset;  // size n_samples+1, indexes into rows
  std::vector<double> inputs;      // n_rows x input_dim
  std::vector<int> targets;        // n_rows
  uint64_t fingerprint = 0;

  int n_rows() const { return static_cast<int>(targets.size()); }
  int rows_of(int sample) const { return sample_offset[sample + 1] - sample_offset[sample]; }
  std::span<const double> input_row(int row) const {
    return {inputs.data() + static_cast<size_t>(row) * input_dim, static_cast<size_t>(input_dim)};
  }
};

inline uint64_t fingerprint_of(const ClassifDataset& d) {
  Fnv1a h;
  h.update_str("classif");
  h.update_i64(d.size());
  for (int i = 0; i < d.size(); ++i) {
    h.update_f64(d.inputs[i][0]);
    h.update_f64(d.inputs[i][1]);
    h.update_i64(d.labels[i]);
  }
  return h.digest();
}

inline uint64_t fingerprint_of(const SeqDataset& d) {
  Fnv1a h;
  h.update_str("seq");
  h.update_i64(d.size());
  h.update_i64(d.vocab);
  h.update_i64(d.context_window);
  for (const auto& seq : d.sequences) {
    h.update_i64(static_cast<int64_t>(seq.size()));
    for (int t : seq) h.update_i64(t);
  }
  return h.digest();
}

inline SupervisedView make_view(const ClassifDataset& d) {
  SupervisedView v;
  v.input_dim = 2;
  v.n_classes = 2;
  v.n_samples = d.size();
  v.sample_offset.resize(d.size() + 1);
  v.inputs.reserve(static_cast<size_t>(d.size()) * 2);
  v.targets.reserve(d.size());
  for (int i = 0; i < d.size(); ++i) {
    v.sample_offset[i] = i;
    v.inputs.push_back(d.inputs[i][0]);
    v.inputs.push_back(d.inputs[i][1]);
    v.targets.push_back(d.labels[i]);
  }
  v.sample_offset[d.size()] = d.size();
  v.fingerprint = fingerprint_of(d);
  return v;
}

inline SupervisedView make_view(const SeqDataset& d) {
  SupervisedView v;
  v.input_dim = d.context_window * (d.vocab + 1);
  v.n_classes = d.vocab;
  v.n_samples = d.size();
  v.sample_offset.assign(d.size() + 1, 0);
  for (int i = 0; i < d.size(); ++i) {
    const auto& seq = d.sequences[i];
    const int sep = sep_position(seq, d.sep_token());
    const int rows = static_cast<int>(seq.size()) - sep - 1;
    v.sample_offset[i + 1] = v.sample_offset[i] + rows;
    for (int s = sep + 1; s < static_cast<int>(seq.size()); ++s) {
      const size_t base = v.inputs.size();
      v.inputs.resize(base + v.input_dim);
      encode_context(seq, s, d.context_window, d.vocab,
                     std::span<double>(v.inputs.data() + base, v.input_dim));
      v.targets.push_back(seq[s]);
    }
  }
  v.fingerprint = fingerprint_of(d);
  return v;
}

inline void to_csv(const ClassifDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "x1,x2,label\n";
  char buf[80];
  for (int i = 0; i < d.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", d.inputs[i][0], d.inputs[i][1],
                  d.labels[i]);
    out << buf;
  }
}

inline void to_csv(const SeqDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& seq : d.sequences) {
    for (size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
}

}  // namespace distillab
