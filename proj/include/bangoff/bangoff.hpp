#pragma once

#include "bangoff/errors.hpp"
#include "bangoff/core.hpp"
#include "bangoff/model.hpp"
#include "bangoff/random.hpp"
#include "bangoff/parallel.hpp"
#include "bangoff/controls.hpp"
#include "bangoff/objective.hpp"
#include "bangoff/optimize.hpp"
#include "bangoff/speed_limit.hpp"
#include "bangoff/analysis.hpp"
#include "bangoff/io.hpp"
#include "bangoff/cli.hpp"
