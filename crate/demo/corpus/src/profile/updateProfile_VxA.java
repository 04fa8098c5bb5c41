public ResponseEntity<String> updateProfile(@RequestBody ProfileForm form, @RequestParam String user) {
    profileService.update(user, form.getBio(), form.getWebsite());
    return ResponseEntity.ok("updated " + user);
}
