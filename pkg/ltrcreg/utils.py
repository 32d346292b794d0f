# Copyright (C) 2021 Wildfire Games.
# Copyright (C) 2026 The ltrcreg developers.
# This file is part of ltrcreg.
#
# ltrcreg is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# ltrcreg is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with ltrcreg.  If not, see <http://www.gnu.org/licenses/>.

"""Command line helpers."""

import json
import logging
import tomllib
from argparse import ArgumentParser, Namespace
from collections.abc import Sequence


def configure_logging(verbosity: int | None) -> None:
    """Set up logging to stderr for a verbosity level from 0 to 3."""
    verbosity = verbosity or 0
    log_level = logging.WARNING
    if verbosity == 1:
        log_level = logging.INFO
    elif verbosity == 2:
        log_level = logging.DEBUG
    elif verbosity >= 3:
        log_level = logging.DEBUG
        logging.getLogger().setLevel(log_level)

    logging.basicConfig(
        format="%(asctime)s %(levelname)-8s %(message)s", datefmt="%Y-%m-%dT%H:%M:%S%z"
    )
    logging.getLogger("ltrcreg").setLevel(log_level)


class ArgumentParserWithConfigFile(ArgumentParser):
    """ArgumentParser with support for values in TOML files.

    This extends the ArgumentParser class by a pre-defined
    `--config-file` parameter, which allows storing config options in
    TOML files, instead of providing them as command line options.
    The options in the configuration file have to be named like the
    destination variables of the parser arguments.

    Options at the top level of the file apply to every subcommand
    which has them, options in a table named like a subcommand only to
    that subcommand. If an option is present in the configuration file
    and in the command line options, the value from the command line
    options takes precedence.

    A JSON run manifest can be given instead of a TOML file. Its
    ``config`` block replays the options of the run which wrote it,
    and only applies to the same subcommand.
    """

    def __init__(self, *args, **kwargs):
        """Create a parser with an option for a config file."""
        super().__init__(*args, **kwargs)
        self._commands = None
        self.add_argument(
            "--config-file",
            help="Path to a TOML configuration file or a JSON run manifest. Options "
            "in the configuration will be used as defaults for command line "
            "options and will be overwritten if the command line option is "
            "provided with a non-default value.",
        )

    def add_subparsers(self, **kwargs):
        """Add subcommands, which get plain argument parsers."""
        kwargs.setdefault("parser_class", ArgumentParser)
        self._commands = super().add_subparsers(**kwargs)
        return self._commands

    def _defaults(self, command: str | None) -> dict:
        defaults = vars(super().parse_args([command] if command else []))
        defaults.pop("config_file", None)
        return defaults

    def _read_config(self, config_file: str, command: str | None) -> dict:
        if not config_file.endswith(".json"):
            with open(config_file, "rb") as r:
                return tomllib.load(r)
        with open(config_file, encoding="utf-8") as r:
            manifest = json.load(r)
        if not isinstance(manifest, dict) or not isinstance(manifest.get("config"), dict):
            self.error(f'The given manifest "{config_file}" has no config block')
        if command is None:
            return manifest["config"]
        if manifest.get("command") != command:
            self.error(
                f'The given manifest "{config_file}" was written by '
                f"{manifest.get('command')!r}, not {command!r}"
            )
        return {command: manifest["config"]}

    def parse_args(
        self, args: Sequence[str] | None = None, namespace: Namespace | None = None
    ) -> Namespace:
        """Parse arguments with config file values as defaults."""
        parsed_args = super().parse_args(args, namespace)
        config_file = parsed_args.config_file
        delattr(parsed_args, "config_file")
        if not config_file:
            return parsed_args

        command = getattr(parsed_args, "command", None)
        try:
            toml_data = self._read_config(config_file, command)
        except FileNotFoundError:
            self.error(f'The given configuration file "{config_file}" doesn\'t exist.')
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            self.error(f'The given configuration file "{config_file}" is invalid: {exc}')

        commands = self._commands.choices if self._commands else {}
        default_args = self._defaults(command)
        known = set(default_args)
        for name in commands:
            known |= set(self._defaults(name))

        changed_args = {
            key for key, value in vars(parsed_args).items() if default_args.get(key) != value
        }

        options = {}
        for key, value in toml_data.items():
            if key in commands:
                if not isinstance(value, dict):
                    self.error(f"The configuration for {key} must be a table")
                continue
            if key not in known:
                self.error(f"The configuration file contains an unrecognized option: {key}")
            options[key] = value
        for key, value in toml_data.get(command, {}).items():
            if key not in default_args:
                self.error(
                    f"The configuration file contains an unrecognized option for {command}: {key}"
                )
            options[key] = value

        for key, value in options.items():
            if key not in default_args or key in changed_args:
                continue
            setattr(parsed_args, key, value)

        return parsed_args
