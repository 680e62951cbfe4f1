#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <doctest.h>

#include "sra/attack.hpp"
#include "sra/error.hpp"
#include "sra/guard.hpp"
#include "sra/synth.hpp"

namespace sra::test {

// Small planted-community world with a briefly trained SAGE-lite target.
struct World {
  Dataset ds;
  Split split;
  PartitionResult parts;
  RecModel model;
};

inline SynthConfig tiny_synth() {
  SynthConfig c;
  c.users = 120;
  c.items = 300;
  c.interactions = 2400;
  c.social_pairs = 360;
  c.communities = 4;
  return c;
}

inline const World& world() {
  static const World w = [] {
    Dataset ds = synthesize(tiny_synth(), 3);
    Split split = split_interactions(ds, 0.2, 3);
    PartitionConfig pc;
    pc.walks_per_node = 4;
    pc.walk_length = 20;
    pc.skipgram.dim = 8;
    auto parts = partition_social(ds.user_count, ds.social, pc, 3);
    RecConfig rc;
    rc.dim = 16;
    rc.depth = 2;
    RecModel model(rc, ds.user_count, ds.item_count, 3);
    model.attach(split.train_by_user, ds.friends());
    TrainOptions opts;
    opts.epochs = 30;
    train(model, split, ds, opts);
    return World{std::move(ds), std::move(split), std::move(parts), std::move(model)};
  }();
  return w;
}

// Central differences over every coordinate of `params`; the analytic
// gradient must agree to 1e-4 relative (absolute below 1e-4 in magnitude).
inline double max_fd_error(const std::function<double()>& loss, std::span<double> params,
                           std::span<const double> analytic, double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss();
    params[i] = keep - h;
    const double down = loss();
    params[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-4});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an sra::Error");
  return ErrorKind::Usage;
}

}  // namespace sra::test
