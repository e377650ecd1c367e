#pragma once

#include "hjacobi/boundary.hpp"
#include "hjacobi/ergodic.hpp"
#include "hjacobi/errors.hpp"
#include "hjacobi/functional.hpp"
#include "hjacobi/growth_rate.hpp"
#include "hjacobi/invariant.hpp"
#include "hjacobi/io.hpp"
#include "hjacobi/params.hpp"
#include "hjacobi/path_stats.hpp"
#include "hjacobi/pd.hpp"
#include "hjacobi/pd_limit.hpp"
#include "hjacobi/portfolio.hpp"
#include "hjacobi/quadrature.hpp"
#include "hjacobi/rng.hpp"
#include "hjacobi/sde.hpp"
#include "hjacobi/simplex.hpp"
#include "hjacobi/stats.hpp"
#include "hjacobi/wealth.hpp"
