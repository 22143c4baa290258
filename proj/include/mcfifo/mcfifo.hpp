#pragma once

#include "mcfifo/analytic.hpp"
#include "mcfifo/config.hpp"
#include "mcfifo/curve.hpp"
#include "mcfifo/decay_rate.hpp"
#include "mcfifo/error.hpp"
#include "mcfifo/experiments.hpp"
#include "mcfifo/oracle.hpp"
#include "mcfifo/random.hpp"
#include "mcfifo/simulator.hpp"
#include "mcfifo/traffic.hpp"
