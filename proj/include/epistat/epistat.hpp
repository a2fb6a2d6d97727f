#pragma once

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"
#include "epistat/core/gse.hpp"
#include "epistat/core/replicate.hpp"
#include "epistat/core/rng.hpp"
#include "epistat/emerging/generation.hpp"
#include "epistat/emerging/growth.hpp"
#include "epistat/emerging/intervals.hpp"
#include "epistat/final_size/estimators.hpp"
#include "epistat/final_size/multitype.hpp"
#include "epistat/inference/abc.hpp"
#include "epistat/inference/complete_data.hpp"
#include "epistat/inference/da_mcmc.hpp"
#include "epistat/inference/posterior.hpp"
#include "epistat/inference/prior.hpp"
#include "epistat/io/csv.hpp"
#include "epistat/io/envelope.hpp"
#include "epistat/io/schemas.hpp"
#include "epistat/numeric/glm.hpp"
#include "epistat/numeric/optimize.hpp"
#include "epistat/structured/household.hpp"
#include "epistat/structured/patches.hpp"
#include "epistat/surveillance/endemic_epidemic.hpp"
#include "epistat/surveillance/farrington.hpp"
#include "epistat/surveillance/negbin.hpp"
#include "epistat/surveillance/scoring.hpp"
