#pragma once

#include "spillover/calendar.hpp"
#include "spillover/characteristics.hpp"
#include "spillover/config.hpp"
#include "spillover/csv.hpp"
#include "spillover/econometrics.hpp"
#include "spillover/error.hpp"
#include "spillover/garch.hpp"
#include "spillover/merton.hpp"
#include "spillover/numeric.hpp"
#include "spillover/optimize.hpp"
#include "spillover/panel.hpp"
#include "spillover/parallel.hpp"
#include "spillover/pipeline.hpp"
#include "spillover/random.hpp"
#include "spillover/synth.hpp"
#include "spillover/tail_risk.hpp"
#include "spillover/var.hpp"
