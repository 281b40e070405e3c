#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "zeroone/ensemble.hpp"
#include "test_util.hpp"

using namespace zeroone;
using zeroone_test::make_blobs;
using zeroone_test::random_dataset;
using zeroone_test::random_network;

namespace {

// 1-D network that predicts `label` for every input.
SignNetwork constant_network(int label) {
  SignNetwork net;
  net.hidden_weights = Matrix::from_rows({{0}});  // hidden sign always +1
  net.hidden_biases = {0};
  net.output_weights = {static_cast<double>(label)};
  net.output_bias = 0;
  return net;
}

Ensemble<SignNetwork> constant_ensemble(std::size_t positives, std::size_t k) {
  Ensemble<SignNetwork> e;
  for (std::size_t i = 0; i < k; ++i)
    e.members.push_back(constant_network(i < positives ? +1 : -1));
  return e;
}

}  // namespace

TEST_CASE("vote pinned examples") {
  const std::vector<double> x{1.0};
  {
    const VoteResult r = vote(constant_ensemble(5, 8), x);
    CHECK(r.positive_votes == 5);
    CHECK(r.votes == 8);
    CHECK(r.probability_positive == 5.0 / 8.0);
    CHECK(r.label == +1);
  }
  {
    const VoteResult r = vote(constant_ensemble(4, 8), x);  // 4 vs 4 tie
    CHECK(r.label == +1);
    CHECK(r.probability_positive == 0.5);
  }
  {
    const VoteResult r = vote(constant_ensemble(1, 3), x);
    CHECK(r.label == -1);
    CHECK(r.probability_positive == 1.0 / 3.0);
  }
  CHECK_THROWS_AS(vote(Ensemble<SignNetwork>{}, x), std::invalid_argument);
}

TEST_CASE("vote label matches the tie rule for every (k, count) pair up to 8") {
  const std::vector<double> x{0.5};
  for (std::size_t k = 1; k <= 8; ++k) {
    for (std::size_t count = 0; count <= k; ++count) {
      const VoteResult r = vote(constant_ensemble(count, k), x);
      CHECK(r.positive_votes == count);
      const int want = 2 * count >= k ? +1 : -1;
      CHECK(r.label == want);
      // Complementary probabilities are exact as rationals over k.
      CHECK(r.positive_votes + (k - count) == k);
    }
  }
}

TEST_CASE("vote probabilities are exact for power-of-two ensemble sizes") {
  const std::vector<double> x{0.5};
  for (std::size_t k : {1u, 2u, 4u, 8u}) {
    for (std::size_t count = 0; count <= k; ++count) {
      const VoteResult r = vote(constant_ensemble(count, k), x);
      CHECK(r.probability_positive + static_cast<double>(k - count) / static_cast<double>(k) ==
            1.0);
    }
  }
}

TEST_CASE("vote matches a per-member enumeration oracle") {
  Rng rng(31);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    Ensemble<SignNetwork> e;
    for (std::size_t m = 0; m < 3; ++m)
      e.members.push_back(random_network(4, 3, 600 + static_cast<std::uint64_t>(3 * rep + m)));
    std::vector<double> x{unif(rng), unif(rng), unif(rng), unif(rng)};
    std::size_t expect = 0;
    for (const SignNetwork& m : e.members)
      if (predict(m, x) == +1) ++expect;
    const VoteResult r = vote(e, x);
    CHECK(r.positive_votes == expect);
    CHECK(r.label == (2 * expect >= 3 ? +1 : -1));
  }
}

TEST_CASE("permuting member order never changes the vote") {
  Rng rng(77);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  Ensemble<SignNetwork> e;
  for (std::size_t m = 0; m < 4; ++m) e.members.push_back(random_network(2, 2, 800 + m));
  const std::vector<double> x{unif(rng), unif(rng)};
  const VoteResult base = vote(e, x);
  std::vector<std::size_t> order{0, 1, 2, 3};
  while (std::next_permutation(order.begin(), order.end())) {
    Ensemble<SignNetwork> permuted;
    for (std::size_t i : order) permuted.members.push_back(e.members[i]);
    CHECK(vote(permuted, x) == base);
  }
}

TEST_CASE("train_ensemble: member i uses seed base+i, reproducibly") {
  LabeledDataset data = make_blobs(12, 2, 3.0, 42);
  TrainConfig config;
  config.hidden_nodes = 2;
  config.epochs = 10;
  config.seed = 100;

  const Ensemble<SignNetwork> e = train_ensemble(data, config, 3);
  REQUIRE(e.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    TrainConfig member_config = config;
    member_config.seed = 100 + i;
    CHECK(e.members[i] == train(data, member_config).network);
  }
  const Ensemble<SignNetwork> again = train_ensemble(data, config, 3);
  CHECK(again.members == e.members);
  CHECK_THROWS_AS(train_ensemble(data, config, 0), std::invalid_argument);
}

TEST_CASE("a k=1 ensemble behaves exactly as its member") {
  LabeledDataset data = random_dataset(20, 3, 9);
  TrainConfig config;
  config.hidden_nodes = 2;
  config.epochs = 5;
  config.seed = 55;
  const Ensemble<SignNetwork> e = train_ensemble(data, config, 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const VoteResult r = vote(e, data.row(i));
    CHECK(r.label == predict(e.members[0], data.row(i)));
    CHECK((r.probability_positive == 0.0 || r.probability_positive == 1.0));
  }
}

TEST_CASE("ensemble accuracy tracks the best member on separated blobs") {
  LabeledDataset train_data = make_blobs(100, 3, 4.0, 7000);
  LabeledDataset test_data = make_blobs(100, 3, 4.0, 7001);
  TrainConfig config;
  config.hidden_nodes = 4;
  config.epochs = 300;
  config.seed = 1;
  const Ensemble<SignNetwork> e = train_ensemble(train_data, config, 8);

  double best_member = 0.0;
  for (const SignNetwork& m : e.members) {
    const std::uint64_t correct =
        test_data.size() - zero_one_mismatches(m, test_data);
    best_member = std::max(best_member,
                           static_cast<double>(correct) / static_cast<double>(test_data.size()));
  }
  const double ensemble_acc = ensemble_accuracy(e, test_data);
  CHECK(ensemble_acc >= best_member - 0.02);
}
