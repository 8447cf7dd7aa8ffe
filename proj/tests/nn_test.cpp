// Copyright 2026 The evstock Authors.
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

#include "evstock/nn.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "evstock/checkpoint.hpp"

namespace evstock::nn {
namespace {

Matrix Random(int r, int c, std::mt19937_64 &rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double &v : m.data) v = (2 * UnitUniform(rng) - 1) * scale;
  return m;
}

void SetValue(ParamStore &s, const std::string &name, const Matrix &m) {
  s.Get(name)->value = m;
}

TEST(NnTest, SoftmaxOfZerosIsUniform) {
  auto y = SoftmaxRows(Constant(Matrix(1, 3)));
  for (double v : y->value.data) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(NnTest, ReluAndConcatShapes) {
  auto y = Relu(Constant(Matrix::FromRows({{-1, 2}})));
  EXPECT_EQ(y->value, Matrix::FromRows({{0, 2}}));
  auto c = ConcatCols({Constant(Matrix(2, 3)), Constant(Matrix(2, 5))});
  EXPECT_EQ(c->value.rows, 2);
  EXPECT_EQ(c->value.cols, 8);
  EXPECT_THROW(ConcatCols({Constant(Matrix(2, 3)), Constant(Matrix(3, 5))}), ShapeError);
  EXPECT_THROW(MatMul(Constant(Matrix(2, 3)), Constant(Matrix(2, 3))), ShapeError);
}

TEST(NnTest, NonFiniteIsAnError) {
  auto big = Constant(Matrix::FromRows({{1e308}}));
  EXPECT_THROW(Scale(big, 10.0), NumericError);
}

// Each primitive's backward against central differences.
TEST(NnTest, PrimitivesPassGradCheck) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    ParamStore s(trial);
    s.Add("a", 3, 4);
    s.Add("b", 3, 4);
    s.Add("c", 4, 2);
    s.Add("bias", 1, 4);
    s.Add("table", 5, 4);
    SetValue(s, "a", Random(3, 4, rng));
    SetValue(s, "b", Random(3, 4, rng));
    SetValue(s, "c", Random(4, 2, rng));
    SetValue(s, "bias", Random(1, 4, rng));
    const Matrix r34 = Random(3, 4, rng), r32 = Random(3, 2, rng), r33 = Random(3, 3, rng);
    const Matrix r42 = Random(4, 2, rng), r38 = Random(3, 8, rng);
    auto a = s.Get("a"), b = s.Get("b"), c = s.Get("c"), bias = s.Get("bias"),
         table = s.Get("table");
    auto weighted = [](const Var &x, const Matrix &w) { return Sum(Mul(x, Constant(w))); };
    const std::vector<std::pair<const char *, std::function<Var()>>> cases = {
        {"matmul", [&] { return weighted(MatMul(a, c), r32); }},
        {"matmul_t", [&] { return weighted(MatMulT(a, b), r33); }},
        {"transpose", [&] { return weighted(Transpose(c), Matrix(r42.cols, r42.rows, 0.3)); }},
        {"add", [&] { return weighted(Add(a, b), r34); }},
        {"sub", [&] { return weighted(Sub(a, b), r34); }},
        {"mul", [&] { return weighted(Mul(a, b), r34); }},
        {"affine", [&] { return weighted(Affine(a, -2.5, 1.0), r34); }},
        {"add_bias", [&] { return weighted(AddBias(a, bias), r34); }},
        {"concat", [&] { return weighted(ConcatCols({a, b}), r38); }},
        {"softmax", [&] { return weighted(SoftmaxRows(a), r34); }},
        {"sigmoid", [&] { return weighted(Sigmoid(a), r34); }},
        {"tanh", [&] { return weighted(Tanh(a), r34); }},
        {"relu", [&] { return weighted(Relu(a), r34); }},
        {"mean_rows", [&] { return weighted(MeanRows(a), Matrix(1, 4, 0.7)); }},
        {"embedding", [&] { return weighted(Embedding(table, {4, 0, 4}), r34); }},
        {"cross_entropy", [&] { return CrossEntropyLogits(a, {0, 3, 2}); }},
        {"sum_of_squares", [&] { return Sum(Mul(a, a)); }},
    };
    for (const auto &[name, f] : cases) {
      EXPECT_LT(GradCheck(f, s), 1e-6) << name;
    }
  }
}

TEST(NnTest, SumOfSquaresGradient) {
  ParamStore s;
  s.Add("x", 1, 3);
  SetValue(s, "x", Matrix::FromRows({{0.5, -1.25, 2.0}}));
  auto x = s.Get("x");
  EXPECT_LT(GradCheck([&] { return Sum(Mul(x, x)); }, s), 1e-8);
  Backward(Sum(Mul(x, x)));
  EXPECT_EQ(x->grad, Matrix::FromRows({{1.0, -2.5, 4.0}}));
}

TEST(NnTest, LstmPassesGradCheck) {
  std::mt19937_64 rng(2);
  ParamStore s(9);
  s.Add("x", 4, 3);
  SetValue(s, "x", Random(4, 3, rng));
  auto p = AddBiLstm(s, "enc", 3, 2, 2);
  for (const auto &[name, v] : s.entries()) {
    if (name.ends_with(".b")) v->value = Random(1, v->value.cols, rng, 0.5);
  }
  const Matrix w = Random(4, 4, rng);
  auto x = s.Get("x");
  std::mt19937_64 unused(0);
  EXPECT_LT(GradCheck([&] { return Sum(Mul(BiLstm(p, x, 0.0, false, unused), Constant(w))); }, s),
            1e-6);
}

TEST(NnTest, BiLstmShapes) {
  ParamStore s(1);
  std::mt19937_64 rng(0);
  auto p = AddBiLstm(s, "enc", 5, 256, 1);
  auto one = BiLstm(p, Constant(Random(1, 5, rng)), 0.0, false, rng);
  EXPECT_EQ(one->value.rows, 1);
  EXPECT_EQ(one->value.cols, 512);
  auto q = AddBiLstm(s, "small", 5, 3, 3);
  auto seq = BiLstm(q, Constant(Random(7, 5, rng)), 0.0, false, rng);
  EXPECT_EQ(seq->value.rows, 7);
  EXPECT_EQ(seq->value.cols, 6);
}

TEST(NnTest, BiLstmReversalSymmetry) {
  std::mt19937_64 rng(4);
  ParamStore s(3);
  auto p = AddBiLstm(s, "enc", 3, 4, 1);
  for (const auto &[name, v] : s.entries()) {
    if (name.ends_with(".b")) v->value = Random(1, v->value.cols, rng, 0.5);
  }
  const Matrix x = Random(6, 3, rng);
  Matrix xr(6, 3);
  for (int t = 0; t < 6; ++t) {
    for (int c = 0; c < 3; ++c) xr(t, c) = x(5 - t, c);
  }
  BiLstmParams swapped = p;
  std::swap(swapped.layers[0][0], swapped.layers[0][1]);
  auto y = BiLstm(p, Constant(x), 0.0, false, rng)->value;
  auto yr = BiLstm(swapped, Constant(xr), 0.0, false, rng)->value;
  for (int t = 0; t < 6; ++t) {
    for (int c = 0; c < 4; ++c) {
      EXPECT_EQ(yr(t, c), y(5 - t, c + 4));
      EXPECT_EQ(yr(t, c + 4), y(5 - t, c));
    }
  }
}

TEST(NnTest, DropoutOnlyWhenTraining) {
  std::mt19937_64 rng(1);
  auto x = Constant(Matrix(20, 20, 1.0));
  EXPECT_EQ(Dropout(x, 0.2, false, rng)->value, x->value);
  auto y = Dropout(x, 0.2, true, rng)->value;
  int zeros = 0;
  for (double v : y.data) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(v, 1.25);
    }
  }
  EXPECT_GT(zeros, 40);
  EXPECT_LT(zeros, 120);
}

TEST(NnTest, InitIsGlorotUniformAndSeeded) {
  ParamStore a(17), b(17), c(18);
  for (auto *s : {&a, &b, &c}) {
    s->Add("w", 30, 10);
    s->Add("b", 1, 10, Init::kZero);
  }
  EXPECT_EQ(a.Get("w")->value, b.Get("w")->value);
  EXPECT_NE(a.Get("w")->value, c.Get("w")->value);
  const double lim = std::sqrt(6.0 / 40.0);
  double mx = 0;
  for (double v : a.Get("w")->value.data) mx = std::max(mx, std::abs(v));
  EXPECT_LE(mx, lim);
  EXPECT_GT(mx, 0.8 * lim);
  for (double v : a.Get("b")->value.data) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(a.entries()[0].first, "w");
  EXPECT_THROW(a.Add("w", 1, 1), Error);
}

TEST(NnTest, AdamZeroGradientLeavesParameters) {
  ParamStore s;
  s.Add("p", 2, 2);
  const Matrix before = s.Get("p")->value;
  s.Get("p")->GradRef();
  Adam opt;
  opt.Step(s);
  EXPECT_EQ(s.Get("p")->value, before);
  EXPECT_EQ(opt.step(), 1);
}

TEST(NnTest, AdamFirstStepMovesByLearningRate) {
  ParamStore s;
  s.Add("p", 1, 1, Init::kZero);
  s.Get("p")->value.data[0] = 0.5;
  s.Get("p")->GradRef().data[0] = 1.0;
  Adam opt;
  opt.Step(s);
  // m_hat = v_hat = 1 -> step = lr / (1 + eps)
  EXPECT_NEAR(s.Get("p")->value.data[0], 0.5 - 0.001 / (1 + 1e-8), 1e-15);
  EXPECT_TRUE(s.Get("p")->grad.empty());
  EXPECT_EQ(opt.step(), 1);
  s.Get("p")->GradRef();
  opt.Step(s);
  EXPECT_EQ(opt.step(), 2);
}

TEST(NnTest, AdamDecaysLearningRate) {
  ParamStore s;
  s.Add("p", 1, 1, Init::kZero);
  Adam opt(AdamConfig{0.001, 0.9, 0.999, 1e-8, 0.5});
  s.Get("p")->GradRef().data[0] = 1.0;
  opt.Step(s);
  const double after1 = s.Get("p")->value.data[0];
  s.Get("p")->GradRef().data[0] = 1.0;
  opt.Step(s);
  // Second step: m_hat = v_hat = 1 again, lr divided by 1 + 0.5 * 1.
  EXPECT_NEAR(s.Get("p")->value.data[0] - after1, -0.001 / 1.5 / (1 + 1e-8), 1e-15);
}

TEST(NnTest, AdamRequiresGradients) {
  ParamStore s;
  s.Add("p", 1, 1);
  s.Add("q", 1, 1);
  s.Get("p")->GradRef();
  Adam opt;
  EXPECT_THROW(opt.Step(s), Error);
  s.SetTrainable("q", false);
  EXPECT_NO_THROW(opt.Step(s));
}

TEST(NnTest, FrozenParametersReceiveNoGradient) {
  ParamStore s;
  auto a = s.Add("a", 1, 2);
  auto b = s.Add("b", 1, 2);
  s.SetTrainable("b", false);
  Backward(Sum(Mul(a, b)));
  EXPECT_FALSE(a->grad.empty());
  EXPECT_TRUE(b->grad.empty());
}

TEST(NnTest, StopGradientBlocksFlow) {
  ParamStore s;
  auto a = s.Add("a", 1, 2);
  auto b = s.Add("b", 1, 2);
  Backward(Sum(Add(StopGradient(a), b)));
  EXPECT_TRUE(a->grad.empty());
  EXPECT_FALSE(b->grad.empty());
}

TEST(NnTest, VocabBuildOrderAndUnknowns) {
  auto v = Vocab::Build({{"Profit", "rises"}, {"profit", "falls"}, {"x"}}, 4);
  EXPECT_EQ(v.words(), (std::vector<std::string>{"<pad>", "<unk>", "profit", "falls"}));
  EXPECT_EQ(v.Id("PROFIT"), 2);
  EXPECT_EQ(v.Id("rises"), Vocab::kUnk);
  EXPECT_EQ(v.Encode({"falls", "zzz"}), (std::vector<int>{3, 1}));
  EXPECT_EQ(Vocab::FromWords(v.words()), v);
  auto min2 = Vocab::Build({{"a", "a", "b"}}, 10, 2);
  EXPECT_EQ(min2.size(), 3);
}

TEST(NnTest, WordVectorImport) {
  auto v = Vocab::Build({{"profit", "loss"}}, 10);
  Matrix table(v.size(), 4);
  std::istringstream in("profit 1 2\nunseen 5 5\nloss 3 4\n");
  EXPECT_EQ(ImportWordVectors(in, v, table), 2);
  EXPECT_EQ(table(v.Id("loss"), 0), 3);
  EXPECT_EQ(table(v.Id("loss"), 1), 4);
  EXPECT_EQ(table(v.Id("loss"), 2), 0);
  std::istringstream wide("profit 1 2 3 4 5\n");
  EXPECT_THROW(ImportWordVectors(wide, v, table), ParseError);
}

TEST(NnTest, CheckpointRoundTrip) {
  Checkpoint ck;
  ck.config = "model=sspm\nh=4\n";
  ck.vocab = {"<pad>", "<unk>", "profit"};
  ck.alphabet = {"O", "B-SUBJ"};
  Matrix w = Matrix::FromRows({{1, 2}, {3, 4}});
  ck.scaler.per_stock["7203"].Observe(w);
  ck.scaler.global.Observe(w);
  ck.tensors = {{"w", w}, {"b", Matrix::FromRows({{-0.0, 1e-300}})}};
  std::stringstream ss;
  WriteCheckpoint(ss, ck);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 8), "EVSTCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);  // little-endian version
  auto back = ReadCheckpoint(ss);
  EXPECT_EQ(back, ck);
  std::istringstream bad("NOTACKPT");
  EXPECT_THROW(ReadCheckpoint(bad), Error);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(ReadCheckpoint(truncated), Error);
}

}  // namespace
}  // namespace evstock::nn
