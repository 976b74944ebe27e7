# Config service module

