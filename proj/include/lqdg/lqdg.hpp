#pragma once

#include "lqdg/errors.hpp"
#include "lqdg/game_model.hpp"
#include "lqdg/instance_gen.hpp"
#include "lqdg/io.hpp"
#include "lqdg/metrics.hpp"
#include "lqdg/rng.hpp"
#include "lqdg/solvers.hpp"
#include "lqdg/svg_plot.hpp"
#include "lqdg/bench.hpp"
