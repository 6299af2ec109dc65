#pragma once

// Everything except the command-line front end (cli.hpp), which also needs CLI11 and nlohmann/json.

#include "bdarch/compositional.hpp"
#include "bdarch/correlation.hpp"
#include "bdarch/covariates.hpp"
#include "bdarch/diagnostics.hpp"
#include "bdarch/dirichlet.hpp"
#include "bdarch/error.hpp"
#include "bdarch/forecast.hpp"
#include "bdarch/inference.hpp"
#include "bdarch/io.hpp"
#include "bdarch/metrics.hpp"
#include "bdarch/model.hpp"
#include "bdarch/nuts.hpp"
#include "bdarch/posterior.hpp"
#include "bdarch/random.hpp"
#include "bdarch/simulation.hpp"
#include "bdarch/special.hpp"
#include "bdarch/sweep.hpp"
