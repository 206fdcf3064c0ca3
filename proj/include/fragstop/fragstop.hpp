#pragma once

#include "fragstop/errors.hpp"
#include "fragstop/rng.hpp"
#include "fragstop/stats.hpp"
#include "fragstop/parallel.hpp"
#include "fragstop/levy.hpp"
#include "fragstop/pathsim.hpp"
#include "fragstop/expfun.hpp"
#include "fragstop/stopsolve.hpp"
#include "fragstop/fragsim.hpp"
#include "fragstop/harness.hpp"
