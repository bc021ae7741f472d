#pragma once

#include "omcs/config.hpp"
#include "omcs/error.hpp"
#include "omcs/experiment.hpp"
#include "omcs/frac_gfq.hpp"
#include "omcs/generators.hpp"
#include "omcs/gfq_thresholds.hpp"
#include "omcs/instance_io.hpp"
#include "omcs/lambert_w.hpp"
#include "omcs/lila.hpp"
#include "omcs/model.hpp"
#include "omcs/oracles.hpp"
#include "omcs/parallel.hpp"
#include "omcs/pf_setaside.hpp"
#include "omcs/rng.hpp"
#include "omcs/rounding.hpp"
#include "omcs/svg.hpp"
#include "omcs/trace.hpp"
