#pragma once

#include "condmed/asymptotics.hpp"
#include "condmed/bench.hpp"
#include "condmed/brownian.hpp"
#include "condmed/csv.hpp"
#include "condmed/errors.hpp"
#include "condmed/estimator.hpp"
#include "condmed/kernel.hpp"
#include "condmed/parallel.hpp"
#include "condmed/point.hpp"
#include "condmed/rng.hpp"
#include "condmed/schedule.hpp"
#include "condmed/weiszfeld.hpp"
